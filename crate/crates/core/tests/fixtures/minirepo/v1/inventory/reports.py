def summarize(warehouse):
    lines = []
    for sku, item in sorted(warehouse.items.items()):
        lines.append(f"{sku}: {item.quantity}")
    return lines


def format_table(rows, width=20):
    return "\n".join(row.ljust(width) for row in rows)
