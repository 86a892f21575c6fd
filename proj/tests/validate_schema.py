"""Validates a pipeline JSON report against docs/report.schema.json."""
import json
import sys

import jsonschema

schema_path, report_path = sys.argv[1], sys.argv[2]
with open(schema_path) as f:
    schema = json.load(f)
with open(report_path) as f:
    report = json.load(f)
jsonschema.Draft202012Validator(schema).validate(report)
print("report matches schema", schema.get("properties", {}).get("schema_version", {}).get("const"))
