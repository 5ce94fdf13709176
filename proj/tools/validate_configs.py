"""Validate run configurations against docs/config.schema.json."""
import json
import sys

import jsonschema

schema_path, *configs = sys.argv[1:]
with open(schema_path) as f:
    schema = json.load(f)
jsonschema.Draft202012Validator.check_schema(schema)
for path in configs:
    with open(path) as f:
        jsonschema.validate(json.load(f), schema, cls=jsonschema.Draft202012Validator)
    print("ok", path)
