import pytest

from fieldmeta.table import Table, build_field


def make_table(columns: dict[str, list], table_id: str = "t") -> Table:
    """Build a Table from {header: [cell values]} preserving insertion order."""
    fields = tuple(
        build_field(i, header, values) for i, (header, values) in enumerate(columns.items())
    )
    n_rows = len(next(iter(columns.values()))) if columns else 0
    return Table(id=table_id, fields=fields, n_rows=n_rows)


@pytest.fixture
def fig_table() -> Table:
    """Small product table: name key, category breakdown, two prices."""
    return make_table(
        {
            "Product Name": ["Apple", "Banana", "Cherry", "Durian"],
            "Category": ["Fruit", "Fruit", "Fruit", "Fruit"],
            "Price": ["$5", "$7", "$3", "$9"],
            "Discount": ["0.1", "0.2", "0.15", "0.05"],
        },
        table_id="fig",
    )
