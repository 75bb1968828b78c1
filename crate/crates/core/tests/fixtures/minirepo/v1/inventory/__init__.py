from .models import Item, Warehouse
from .pricing import PriceRule, apply_discount

__all__ = ["Item", "Warehouse", "PriceRule", "apply_discount"]
