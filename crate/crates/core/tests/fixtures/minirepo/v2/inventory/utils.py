import re

SEPARATOR = "-"


def slugify(text):
    text = text.strip().lower()
    return re.sub(r"[^a-z0-9]+", SEPARATOR, text)


def dedupe(values):
    seen = set()
    return [v for v in values if not (v in seen or seen.add(v))]


def chunked(values, size):
    for start in range(0, len(values), size):
        yield values[start:start + size]
