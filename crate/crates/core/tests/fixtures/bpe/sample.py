from setuptools import setup

setup(
    name="inventory",
    version="0.3.0",
    packages=["inventory"],
)
from .models import Item, Warehouse
from .pricing import PriceRule, apply_discount

__all__ = ["Item", "Warehouse", "PriceRule", "apply_discount"]
import argparse

from .reports import format_table, summarize
from .storage import JsonStore


def parse_args(argv=None):
    parser = argparse.ArgumentParser(prog="inventory")
    parser.add_argument("store")
    return parser.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    store = JsonStore(args.store)
    print(format_table(summarize(store.load())))
class Item:
    """A stock keeping unit with a quantity on hand."""

    def __init__(self, sku, name, quantity=0):
        self.sku = sku
        self.name = name
        self.quantity = quantity

    def restock(self, amount):
        if amount <= 0:
            raise ValueError("restock amount must be positive")
        self.quantity += amount


class Warehouse:
    """Holds items keyed by sku."""

    def __init__(self):
        self.items = {}

    def add(self, item):
        self.items[item.sku] = item

    def remove(self, sku):
        return self.items.pop(sku)

    def total_quantity(self):
        return sum(item.quantity for item in self.items.values())
ROUNDING = 2


class PriceRule:
    """Percentage markdown applied to a base price."""

    def __init__(self, percent):
        self.percent = percent

    def apply(self, price):
        return apply_discount(price, self.percent)


def apply_discount(price, percent):
    reduced = price - price * percent / 100
    return round(reduced, ROUNDING)


def bulk_price(price, count):
    if count >= 100:
        return apply_discount(price, 10) * count
    return price * count
def summarize(warehouse):
    lines = []
    for sku, item in sorted(warehouse.items.items()):
        lines.append(f"{sku}: {item.quantity}")
    return lines


def format_table(rows, width=20):
    return "\n".join(row.ljust(width) for row in rows)
import json


class JsonStore:
    """Persists a warehouse as a JSON document."""

    def __init__(self, path):
        self.path = path

    def load(self):
        with open(self.path) as fh:
            return json.load(fh)

    def save(self, warehouse):
