#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "bfk/campaigns.hpp"

using namespace bfk;
using namespace bfk::lab;

namespace {

void write_out(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  io::write_text_file(path, text);
}

std::string render(const std::string& command, const RunConfig& cfg, const RunResult& res, const std::string& format) {
  if (format == "csv") return run_csv(cfg, res);
  return run_json(command, cfg, res).dump(2) + "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bfk: exact biset-functor computations and verification campaigns"};
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig cfg;
  cfg.cache_dir = io::default_cache_dir();
  std::string format = "json";
  std::string output;
  std::string reading = "subsection";

  app.add_option("--p", cfg.p, "odd prime")->capture_default_str();
  app.add_option("--max-order", cfg.max_order, "largest group order in the catalog")->capture_default_str();
  app.add_option("--cache-dir", cfg.cache_dir, "cache directory (default: $BFK_CACHE_DIR; empty disables)");
  app.add_option("--seed", cfg.seed, "sampling seed")->capture_default_str();
  app.add_option("--jobs", cfg.jobs, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--format", format, "report format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  app.add_option("--output,-o", output, "write the report to a file instead of stdout");
  app.add_option("--group", cfg.groups, "restrict to these groups (descriptor or table file); repeatable");
  app.add_option("--samples", cfg.samples, "sampled cases per claim on groups above the exhaustive order")->capture_default_str();
  app.add_option("--exhaustive-order", cfg.exhaustive_order, "largest order checked exhaustively")->capture_default_str();
  app.add_option("--sigma-reading", reading, "component reading of the retraction sum")
      ->check(CLI::IsMember({"subsection", "section"}))
      ->capture_default_str();
  app.add_flag("--timings", cfg.timings, "include wall time per report (breaks byte-identical output)");

  auto* catalog = app.add_subcommand("catalog", "list the catalog groups");

  auto* verify = app.add_subcommand("verify", "run a verification campaign");
  std::string campaign;
  verify->add_option("campaign", campaign, "induction | exact | main | appendix")
      ->required()
      ->check(CLI::IsMember({"induction", "exact", "main", "appendix"}));
  verify->add_option("--class", cfg.cls, "main: restrict to one class")->check(CLI::IsMember({"E", "E2", "E3", "X", "X2", "X3"}));
  verify->add_option("--functor", cfg.functor, "main: functor")->check(CLI::IsMember({"B", "K", "Bdual", "Kdual"}))->capture_default_str();

  auto* probe = app.add_subcommand("probe", "run a probe");
  std::string probe_name;
  probe->add_option("name", probe_name, "m")->required()->check(CLI::IsMember({"m"}));

  auto* limit = app.add_subcommand("limit", "inverse limit of one coefficient system");
  std::string group, cls = "X3", functor = "Kdual";
  limit->add_option("--group", group, "descriptor or table file")->required();
  limit->add_option("--class", cls, "section class")->check(CLI::IsMember({"E", "E2", "E3", "X", "X2", "X3"}))->capture_default_str();
  limit->add_option("--functor", functor, "functor")->check(CLI::IsMember({"B", "K", "Bdual", "Kdual"}))->capture_default_str();

  auto* emit = app.add_subcommand("emit", "write every campaign report and the catalog to a directory");
  std::string out_dir;
  emit->add_option("--out", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);
  cfg.reading = reading == "section" ? SigmaReading::Section : SigmaReading::Subsection;

  try {
    if (*catalog) {
      write_out(output, catalog_json(cfg).dump(2) + "\n");
      return 0;
    }
    if (*limit) {
      write_out(output, limit_json(cfg, group, cls, functor).dump(2) + "\n");
      return 0;
    }
    if (*verify || *probe) {
      std::string name = *verify ? campaign : "probe";
      auto res = run_campaigns(cfg, {name});
      write_out(output, render(*verify ? "verify " + campaign : "probe m", cfg, res, format));
      return res.exit_code;
    }
    if (*emit) {
      std::filesystem::create_directories(out_dir);
      int code = 0;
      std::string ext = format == "csv" ? ".csv" : ".json";
      for (const std::string name : {"induction", "exact", "main", "probe", "appendix"}) {
        auto res = run_campaigns(cfg, {name});
        std::string command = name == std::string("probe") ? "probe m" : "verify " + std::string(name);
        io::write_text_file(std::filesystem::path(out_dir) / (name + ext), render(command, cfg, res, format));
        if (res.exit_code == 2 || (res.exit_code == 3 && code == 0)) code = res.exit_code;
      }
      io::write_text_file(std::filesystem::path(out_dir) / "catalog.json", catalog_json(cfg).dump(2) + "\n");
      return code;
    }
  } catch (const std::exception& e) {
    std::cerr << "bfk: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
