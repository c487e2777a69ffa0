import json as _j0


def save(data, path):
    with open(path, "w") as fh:
        fh.write(_j0.dumps(data, indent=2))
    return path
