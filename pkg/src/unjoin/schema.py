"""Relational schema model and deterministic schema simplification.

A multi-table schema is flattened into a single virtual table named
after the database. Every column of every table contributes exactly one
entry rendered as ``table_name.column_name``. The mapping back to the
original (table, column) pair is carried explicitly on each entry, so
downstream code never has to split the rendered string and guess.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path


class SchemaError(ValueError):
    """Raised when a schema violates a structural invariant."""

    def __init__(self, message: str, db_id: str = "", names: tuple[str, ...] = ()):
        super().__init__(message)
        self.db_id = db_id
        self.names = names


@dataclass(frozen=True)
class ColumnDef:
    name: str
    col_type: str = ""
    description: str = ""


@dataclass(frozen=True)
class TableDef:
    name: str
    columns: tuple[ColumnDef, ...]

    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]


@dataclass(frozen=True)
class DatabaseSchema:
    db_id: str
    tables: tuple[TableDef, ...]
    # (table1, col1, table2, col2) with names exactly as declared
    foreign_keys: tuple[tuple[str, str, str, str], ...] = ()

    def __post_init__(self):
        if not self.db_id:
            raise SchemaError("schema requires a non-empty db_id")
        if not self.tables:
            raise SchemaError(f"schema {self.db_id!r} has no tables", self.db_id)
        seen: dict[str, str] = {}
        for t in self.tables:
            if not t.name:
                raise SchemaError(f"schema {self.db_id!r} has an unnamed table", self.db_id)
            low = t.name.lower()
            if low in seen:
                raise SchemaError(
                    f"schema {self.db_id!r}: table name collision between "
                    f"{seen[low]!r} and {t.name!r}",
                    self.db_id,
                    (seen[low], t.name),
                )
            seen[low] = t.name
            cols: dict[str, str] = {}
            for c in t.columns:
                if not c.name:
                    raise SchemaError(
                        f"schema {self.db_id!r}: table {t.name!r} has an unnamed column",
                        self.db_id,
                        (t.name,),
                    )
                cl = c.name.lower()
                if cl in cols:
                    raise SchemaError(
                        f"schema {self.db_id!r}: column name collision in table "
                        f"{t.name!r} between {cols[cl]!r} and {c.name!r}",
                        self.db_id,
                        (t.name, cols[cl], c.name),
                    )
                cols[cl] = c.name
        for t1, c1, t2, c2 in self.foreign_keys:
            for tname, cname in ((t1, c1), (t2, c2)):
                table = self.find_table(tname)
                if table is None:
                    raise SchemaError(
                        f"schema {self.db_id!r}: foreign key references unknown table {tname!r}",
                        self.db_id,
                        (tname,),
                    )
                if cname.lower() not in {c.name.lower() for c in table.columns}:
                    raise SchemaError(
                        f"schema {self.db_id!r}: foreign key references unknown column "
                        f"{tname!r}.{cname!r}",
                        self.db_id,
                        (tname, cname),
                    )

    def find_table(self, name: str) -> TableDef | None:
        low = name.lower()
        for t in self.tables:
            if t.name.lower() == low:
                return t
        return None

    def column_count(self) -> int:
        return sum(len(t.columns) for t in self.tables)


@dataclass(frozen=True)
class SimplifiedEntry:
    rendered: str  # "table_name.column_name"
    table: str
    column: str
    description: str = ""


@dataclass(frozen=True)
class SimplifiedSchema:
    """Single virtual table produced by flattening a DatabaseSchema."""

    name: str
    entries: tuple[SimplifiedEntry, ...]
    _by_rendered: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        index = {}
        for e in self.entries:
            key = e.rendered.lower()
            if key in index:
                raise SchemaError(f"simplified schema {self.name!r}: duplicate entry {e.rendered!r}")
            index[key] = e
        object.__setattr__(self, "_by_rendered", index)

    def lookup(self, rendered: str) -> SimplifiedEntry | None:
        return self._by_rendered.get(rendered.lower())


def simplify_schema(db: DatabaseSchema, descriptions: dict[str, str] | None = None) -> SimplifiedSchema:
    """Flatten ``db`` into one virtual table named after the database.

    Entry order follows the declared table order, then column order
    within each table, so the output is byte-stable for a given input.
    ``descriptions`` optionally maps "table.column" (case-insensitive)
    to human-readable text attached to the matching entry.
    """
    desc = { (k or "").lower(): v for k, v in (descriptions or {}).items() }
    entries = []
    for t in db.tables:
        for c in t.columns:
            rendered = f"{t.name}.{c.name}"
            text = c.description or desc.get(rendered.lower(), "")
            entries.append(SimplifiedEntry(rendered, t.name, c.name, text))
    simplified = SimplifiedSchema(db.db_id, tuple(entries))
    assert len(simplified.entries) == db.column_count()
    return simplified


def render_simplified(simplified: SimplifiedSchema, with_header: bool = True) -> str:
    """Render the virtual table as a prompt block.

    One line per entry. When any entry carries a description, names are
    padded to a common width so descriptions align in a second column.
    """
    lines = []
    if with_header:
        lines.append(f"Table: {simplified.name}")
    has_desc = any(e.description for e in simplified.entries)
    if has_desc:
        width = max((len(e.rendered) for e in simplified.entries), default=0) + 2
        lines.append("Column Name".ljust(width) + "Description")
        for e in simplified.entries:
            if e.description:
                lines.append(e.rendered.ljust(width) + e.description)
            else:
                lines.append(e.rendered)
    else:
        lines.extend(e.rendered for e in simplified.entries)
    return "\n".join(lines)


def render_original_schema(db: DatabaseSchema) -> str:
    """CREATE TABLE-style rendering of the original schema plus FK lines."""
    parts = []
    for t in db.tables:
        col_lines = []
        for c in t.columns:
            col_lines.append(f"  {c.name} {c.col_type}".rstrip())
        parts.append(f"CREATE TABLE {t.name} (\n" + ",\n".join(col_lines) + "\n);")
    text = "\n".join(parts)
    if db.foreign_keys:
        fk_lines = [f"{t1}.{c1} = {t2}.{c2}" for t1, c1, t2, c2 in db.foreign_keys]
        text += "\nForeign Keys:\n" + "\n".join(fk_lines)
    return text


def load_catalogue(path: str | Path) -> dict[str, DatabaseSchema]:
    """Load a benchmark table catalogue (tables.json layout).

    Each record carries original table and column names, with column
    entries as [table_index, name] pairs where index -1 marks the
    placeholder star column, and foreign keys as pairs of global column
    indices into that same list.
    """
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    catalogue: dict[str, DatabaseSchema] = {}
    for entry in raw:
        db_id = entry["db_id"]
        table_names = entry["table_names_original"]
        col_pairs = entry["column_names_original"]
        col_types = entry.get("column_types") or [""] * len(col_pairs)
        per_table: list[list[ColumnDef]] = [[] for _ in table_names]
        owner: list[tuple[str, str] | None] = []
        for (tidx, cname), ctype in zip(col_pairs, col_types):
            if tidx < 0:
                owner.append(None)
                continue
            per_table[tidx].append(ColumnDef(cname, ctype))
            owner.append((table_names[tidx], cname))
        fks = []
        for ci, cj in entry.get("foreign_keys") or []:
            a, b = owner[ci], owner[cj]
            if a is None or b is None:
                continue
            fks.append((a[0], a[1], b[0], b[1]))
        tables = tuple(
            TableDef(name, tuple(cols)) for name, cols in zip(table_names, per_table)
        )
        catalogue[db_id] = DatabaseSchema(db_id, tables, tuple(fks))
    return catalogue


def load_descriptions(db_dir: str | Path) -> dict[str, str]:
    """Read per-column description CSVs from a database_description folder.

    Returns a mapping from lowercase "table.column" to description text.
    Files are named after their table; rows carry the original column
    name and free-text description. Encoding junk is tolerated since the
    benchmark CSVs mix encodings.
    """
    folder = Path(db_dir) / "database_description"
    out: dict[str, str] = {}
    if not folder.is_dir():
        return out
    for csv_path in sorted(folder.glob("*.csv")):
        table = csv_path.stem
        try:
            with open(csv_path, encoding="utf-8-sig", errors="replace", newline="") as fh:
                for row in csv.DictReader(fh):
                    name = (row.get("original_column_name") or "").strip()
                    desc = (row.get("column_description") or "").strip()
                    desc = " ".join(desc.split())
                    if name and desc:
                        out[f"{table}.{name}".lower()] = desc
        except OSError:
            continue
    return out
