"""Runs the bfk CLI and validates its JSON output against the schemas in the repository."""

import csv
import io
import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema

BFK = sys.argv[1]
SCHEMAS = Path(sys.argv[2])
failures = []


def validator(name):
    schema = json.loads((SCHEMAS / f"{name}.schema.json").read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    return jsonschema.Draft202012Validator(schema)


REPORT, CATALOG, LIMIT = validator("report"), validator("catalog"), validator("limit")


def run(*args, expect=0, env=None):
    proc = subprocess.run([BFK, *args], capture_output=True, text=True, env=env)
    if proc.returncode != expect:
        failures.append(f"{' '.join(args)}: exit {proc.returncode}, expected {expect}\n{proc.stderr}")
    return proc


def check(name, v, doc):
    errors = sorted(v.iter_errors(doc), key=lambda e: list(e.path))
    for e in errors[:5]:
        failures.append(f"{name}: {'/'.join(map(str, e.path))}: {e.message}")
    print(f"{name}: {'ok' if not errors else f'{len(errors)} schema errors'}")


check("catalog", CATALOG, json.loads(run("catalog").stdout))
skipped = json.loads(run("catalog", "--group", "cyclic:3", "--group", "elab:3:6").stdout)
check("catalog with skipped group", CATALOG, skipped)
if "skipped" not in skipped["groups"][1]:
    failures.append("elab:3:6 should be skipped in the catalog")

lim = json.loads(run("limit", "--group", "xsp:3", "--class", "X3", "--functor", "Kdual").stdout)
check("limit xsp:3 Kdual X3", LIMIT, lim)
if lim["rank"] != 5 or not lim["eta"]["surjective"]:
    failures.append("limit xsp:3: unexpected rank or unit")
check("limit elab:3:2 B E", LIMIT, json.loads(run("limit", "--group", "elab:3:2", "--class", "E", "--functor", "B").stdout))

ok = json.loads(run("verify", "induction", "--group", "cyclic:9", "--group", "xsp:3").stdout)
check("verify induction", REPORT, ok)

refuted = json.loads(run("verify", "main", "--group", "cyclic:3", "--sigma-reading", "section", expect=2).stdout)
check("verify main, section reading", REPORT, refuted)
bad = [r for r in refuted["reports"] if r["status"] == "refuted"]
if not bad or not all(r["witness_confirmed"] for r in bad):
    failures.append("section reading: expected refuted reports with confirmed witnesses")

check("verify exact, oversized group", REPORT,
      json.loads(run("verify", "exact", "--group", "cyclic:3", "--group", "elab:3:6", expect=3).stdout))

with tempfile.TemporaryDirectory() as tmp:
    a, b = Path(tmp, "a.json"), Path(tmp, "b.json")
    run("verify", "exact", "--max-order", "27", "-o", str(a))
    run("verify", "exact", "--max-order", "27", "--jobs", "2", "-o", str(b))
    if a.read_bytes() != b.read_bytes():
        failures.append("verify exact: reports differ between runs")

    out = Path(tmp, "emit")
    run("emit", "--out", str(out), "--max-order", "9")
    for name in ("induction", "exact", "main", "probe", "appendix"):
        check(f"emit {name}", REPORT, json.loads((out / f"{name}.json").read_text()))
    check("emit catalog", CATALOG, json.loads((out / "catalog.json").read_text()))

rows = list(csv.reader(io.StringIO(run("verify", "exact", "--group", "elab:3:2", "--format", "csv").stdout)))
if rows[0] != ["campaign", "claim", "group", "scope", "status", "witness_confirmed", "data"] or len(rows) < 2:
    failures.append("csv: unexpected header or no rows")
for row in rows[1:]:
    if len(row) != 7:
        failures.append(f"csv: row with {len(row)} fields")
    json.loads(row[6])
print(f"csv: {len(rows) - 1} rows")

err = run("limit", "--group", "nonsense:1", expect=1)
if not err.stderr.startswith("bfk: "):
    failures.append("unknown group: expected a bfk: error message")

for f in failures:
    print("FAIL", f)
sys.exit(1 if failures else 0)
