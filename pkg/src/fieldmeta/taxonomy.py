"""Measure-type taxonomy, unit lexicon, dimension-type registry, aggregation vocabulary.

Default vocabularies ship as editable data files under ``fieldmeta/data``:
19 named measure types plus Others (grouped into 5 categories), the 17 most
frequent dimension types (a full file can be supplied instead), 9 aggregation
functions, and a DBPedia-style property-to-measure-type map.

Unit matching is token-based longest-match: alphabetic units compare
case-insensitively, symbol units (anything with a non-letter character)
compare exactly. Within one measure type and one match class the lexicon is
prefix-free, so the longest match is unambiguous.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

from fieldmeta.errors import DuplicateType, EmptyVocabulary, MissingMapping

OTHERS = "Others"


class MeasureCategory(Enum):
    DIMENSIONLESS = "Dimensionless"
    MONEY = "Money"
    DATA_FILE_SIZE = "DataFileSize"
    TIME = "Time"
    SCIENTIFIC = "Scientific"
    OTHERS = "Others"


@dataclass(frozen=True)
class MeasureType:
    name: str
    category: MeasureCategory
    units: frozenset[str]
    examples: frozenset[str]


@dataclass(frozen=True)
class DimensionType:
    name: str

    @property
    def parent(self) -> str:
        return self.name.split(".", 1)[0]


@dataclass(frozen=True)
class _UnitEntry:
    unit: str        # registry spelling
    canonical: str   # casefolded for words, exact for symbols
    is_word: bool
    type_name: str
    order: int       # registry insertion order, used as tie-break


@dataclass(frozen=True)
class TaxonomyRegistry:
    measure_types: Mapping[str, MeasureType]
    dimension_types: tuple[DimensionType, ...]
    agg_functions: tuple[str, ...]
    property_map: Mapping[str, str]
    _units: tuple[_UnitEntry, ...]

    @property
    def others(self) -> MeasureType:
        return self.measure_types[OTHERS]

    def measure_type_names(self) -> tuple[str, ...]:
        return tuple(self.measure_types)

    def dimension_type_names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.dimension_types)

    def detect_unit(self, text: str) -> tuple[str, MeasureType] | None:
        """Longest-match unit lookup over header/cell text; None when nothing matches."""
        best: _UnitEntry | None = None
        for candidate in _candidate_tokens(text):
            folded = candidate.casefold()
            for entry in self._units:
                if entry.is_word:
                    hit = folded == entry.canonical
                else:
                    hit = candidate == entry.canonical
                if hit and (
                    best is None
                    or len(entry.canonical) > len(best.canonical)
                    or (len(entry.canonical) == len(best.canonical) and entry.order < best.order)
                ):
                    best = entry
        if best is None:
            return None
        return best.unit, self.measure_types[best.type_name]

    def map_property_to_measure_type(self, property_iri: str) -> MeasureType:
        name = self.property_map.get(property_iri, OTHERS)
        return self.measure_types.get(name, self.others)


_TOKEN_STRIP = "()[]{}<>,.;:!?\"'"


def _candidate_tokens(text: str) -> list[str]:
    out = []
    for tok in text.split():
        tok = tok.strip(_TOKEN_STRIP)
        if not tok:
            continue
        out.append(tok)
        lead = re.match(r"^([^\w\s]+)", tok)
        if lead and lead.group(1) != tok:
            out.append(lead.group(1))
        trail = re.search(r"\d([^\W\d_/]+(?:/[^\W\d_]+)?)$", tok)
        if trail:
            out.append(trail.group(1))
        trail_sym = re.search(r"\d([^\w\s]+)$", tok)
        if trail_sym:
            out.append(trail_sym.group(1))
    return out


def _data_path(name: str):
    return resources.files("fieldmeta").joinpath("data", name)


def load_vocabularies(
    measure_types_path: str | Path | None = None,
    dimension_types_path: str | Path | None = None,
    agg_functions_path: str | Path | None = None,
    property_map_path: str | Path | None = None,
) -> TaxonomyRegistry:
    """Load and freeze all vocabularies; any path left None uses the packaged default."""
    measure_types = _load_measure_types(measure_types_path)
    dimension_types = _load_dimension_types(dimension_types_path)
    agg_functions = _load_agg_functions(agg_functions_path)
    property_map = _load_property_map(property_map_path, measure_types)

    units: list[_UnitEntry] = []
    order = 0
    for mt in measure_types.values():
        for unit in sorted(mt.units):
            is_word = unit.isalpha()
            units.append(
                _UnitEntry(
                    unit=unit,
                    canonical=unit.casefold() if is_word else unit,
                    is_word=is_word,
                    type_name=mt.name,
                    order=order,
                )
            )
            order += 1

    return TaxonomyRegistry(
        measure_types=MappingProxyType(measure_types),
        dimension_types=dimension_types,
        agg_functions=agg_functions,
        property_map=MappingProxyType(property_map),
        _units=tuple(units),
    )


def _read_text(path: str | Path | None, default_name: str) -> str:
    if path is None:
        return _data_path(default_name).read_text(encoding="utf-8")
    return Path(path).read_text(encoding="utf-8")


def _load_measure_types(path: str | Path | None) -> dict[str, MeasureType]:
    entries = json.loads(_read_text(path, "measure_types.json"))
    if not entries:
        raise EmptyVocabulary("measure type file has no entries")
    types: dict[str, MeasureType] = {}
    for entry in entries:
        name = entry["name"]
        if name in types:
            raise DuplicateType(f"measure type defined twice: {name}")
        types[name] = MeasureType(
            name=name,
            category=MeasureCategory(entry["category"]),
            units=frozenset(entry.get("units", [])),
            examples=frozenset(entry.get("examples", [])),
        )
    if OTHERS not in types:
        types[OTHERS] = MeasureType(OTHERS, MeasureCategory.OTHERS, frozenset(), frozenset())
    for mt in types.values():
        if mt.category is MeasureCategory.DIMENSIONLESS and mt.units:
            raise DuplicateType(f"dimensionless type {mt.name} must not declare units")
        if mt.category not in (MeasureCategory.DIMENSIONLESS, MeasureCategory.OTHERS) and not mt.units:
            raise EmptyVocabulary(f"type {mt.name} declares no units")
    return types


def _load_dimension_types(path: str | Path | None) -> tuple[DimensionType, ...]:
    lines = [
        line.strip()
        for line in _read_text(path, "dimension_types.txt").splitlines()
        if line.strip()
    ]
    if not lines:
        raise EmptyVocabulary("dimension type file has no entries")
    seen = set()
    for name in lines:
        if name in seen:
            raise DuplicateType(f"dimension type defined twice: {name}")
        seen.add(name)
    return tuple(DimensionType(name) for name in lines)


def _load_agg_functions(path: str | Path | None) -> tuple[str, ...]:
    lines = [
        line.strip().upper()
        for line in _read_text(path, "agg_functions.txt").splitlines()
        if line.strip()
    ]
    if not lines:
        raise EmptyVocabulary("aggregation function file has no entries")
    seen = set()
    for name in lines:
        if name in seen:
            raise DuplicateType(f"aggregation function defined twice: {name}")
        seen.add(name)
    return tuple(lines)


def _load_property_map(
    path: str | Path | None, measure_types: dict[str, MeasureType]
) -> dict[str, str]:
    try:
        mapping = json.loads(_read_text(path, "property_map.json"))
    except (OSError, json.JSONDecodeError) as exc:
        raise MissingMapping(f"cannot load property map: {exc}") from exc
    for iri, type_name in mapping.items():
        if type_name not in measure_types:
            raise MissingMapping(f"{iri} maps to unknown measure type {type_name}")
    return dict(mapping)


_DEFAULT: TaxonomyRegistry | None = None


def default_registry() -> TaxonomyRegistry:
    """Packaged vocabularies, loaded once per process."""
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_vocabularies()
    return _DEFAULT
