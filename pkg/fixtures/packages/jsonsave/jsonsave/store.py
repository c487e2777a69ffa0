import json


def save(data, path):
    with open(path, "w") as fh:
        fh.write(json.dumps(data, indent=2))
    return path
