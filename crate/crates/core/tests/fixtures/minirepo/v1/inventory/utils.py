import re

SEPARATOR = "-"


def slugify(text):
    text = text.strip().lower()
    return re.sub(r"[^a-z0-9]+", SEPARATOR, text)


def chunked(values, size):
    for start in range(0, len(values), size):
        yield values[start:start + size]
