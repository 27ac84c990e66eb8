"""Hierarchical class system derived from a folder tree or alias tables.

Class ids are normalized names (lowercase, diacritics stripped, whitespace
collapsed to underscores), unique across the whole tree. The root is a
synthetic "artifact" node that never appears in labels.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

from .errors import AmbiguousAliasError, TaxonomyError

ROOT = "artifact"


def normalize_name(name: str) -> str:
    """Lowercase, trim, strip diacritics, collapse whitespace to underscores."""
    decomposed = unicodedata.normalize("NFKD", name)
    stripped = "".join(c for c in decomposed if not unicodedata.combining(c))
    return "_".join(stripped.strip().lower().split())


@dataclass
class ClassNode:
    name: str  # normalized id
    display: str
    parent: str | None
    children: list[str] = field(default_factory=list)


class Taxonomy:
    def __init__(self):
        self.nodes: dict[str, ClassNode] = {
            ROOT: ClassNode(ROOT, "Artifact", None)
        }
        self.source_root: Path | None = None

    # -- construction -----------------------------------------------------

    def add_class(self, display: str, parent: str | None = None) -> str:
        parent = parent or ROOT
        if parent not in self.nodes:
            raise TaxonomyError(f"unknown parent class {parent!r}")
        name = normalize_name(display)
        if not name:
            raise TaxonomyError(f"class name {display!r} normalizes to empty")
        if name == ROOT:
            raise TaxonomyError(f"class name {display!r} collides with the root")
        if name in self.nodes:
            other = self.nodes[name]
            raise TaxonomyError(
                f"duplicate class name {name!r} "
                f"(from {display!r} and {other.display!r})"
            )
        self.nodes[name] = ClassNode(name, display, parent)
        self.nodes[parent].children.append(name)
        return name

    @classmethod
    def from_folders(cls, root_path) -> "Taxonomy":
        """Each directory under ``root_path`` becomes a class; nesting becomes
        parent/child."""
        root = Path(root_path)
        if not root.is_dir():
            raise TaxonomyError(f"taxonomy root {root} is not a directory")
        tax = cls()
        tax.source_root = root

        def walk(directory: Path, parent: str):
            for child in sorted(p for p in directory.iterdir() if p.is_dir()):
                name = tax.add_class(child.name, parent)
                walk(child, name)

        walk(root, ROOT)
        if len(tax.nodes) == 1:
            raise TaxonomyError(f"taxonomy root {root} contains no class directories")
        return tax

    # -- queries -----------------------------------------------------------

    def __contains__(self, name: str) -> bool:
        return name in self.nodes and name != ROOT

    def classes(self) -> list[str]:
        return sorted(n for n in self.nodes if n != ROOT)

    def require(self, name: str) -> ClassNode:
        if name not in self.nodes or name == ROOT:
            raise TaxonomyError(f"unknown class {name!r}")
        return self.nodes[name]

    def chain(self, name: str) -> list[str]:
        """Path from the root's child down to ``name`` (root excluded)."""
        node = self.require(name)
        out = [node.name]
        while node.parent is not None and node.parent != ROOT:
            node = self.nodes[node.parent]
            out.append(node.name)
        return out[::-1]

    def ancestors(self, name: str) -> list[str]:
        """Proper ancestors of ``name``, root -> parent order, root excluded."""
        return self.chain(name)[:-1]

    def depth(self, name: str) -> int:
        """Depth below the root: the root's children are depth 0."""
        return len(self.chain(name)) - 1

    def rollup(self, name: str, depth: int) -> str:
        """Ancestor at the given depth; classes shallower than ``depth`` map
        to themselves."""
        if depth < 0:
            raise TaxonomyError(f"rollup depth must be >= 0, got {depth}")
        chain = self.chain(name)
        if len(chain) - 1 <= depth:
            return name
        return chain[depth]

    def resolve_label(self, file_path) -> tuple[str, list[str]]:
        """Map a file under the source folder tree to (leaf class, ancestors).

        The leaf is the deepest containing directory's class; ancestors run
        root -> leaf, excluding both the synthetic root and the leaf.
        """
        if self.source_root is None:
            raise TaxonomyError("taxonomy was not built from a folder tree")
        path = Path(file_path)
        try:
            rel = path.resolve().relative_to(self.source_root.resolve())
        except ValueError:
            raise TaxonomyError(f"{path} lies outside the taxonomy root "
                                f"{self.source_root}")
        dirs = rel.parts[:-1]
        if not dirs:
            raise TaxonomyError(
                f"{path} sits at the taxonomy root; images must live inside a class"
            )
        leaf = None
        for part in dirs:
            name = normalize_name(part)
            if name not in self.nodes:
                raise TaxonomyError(f"directory {part!r} is not a known class")
            leaf = name
        return leaf, self.ancestors(leaf)

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        def subtree(name: str) -> dict:
            node = self.nodes[name]
            return {
                "name": node.name,
                "display": node.display,
                "children": [subtree(c) for c in node.children],
            }

        return subtree(ROOT)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_dict(cls, d: dict) -> "Taxonomy":
        tax = cls()

        def walk(entry: dict, parent: str | None):
            if parent is None:
                name = ROOT
            else:
                name = tax.add_class(entry.get("display", entry["name"]), parent)
                if name != entry["name"]:
                    raise TaxonomyError(
                        f"stored name {entry['name']!r} does not normalize "
                        f"consistently (got {name!r})"
                    )
            for child in entry.get("children", []):
                walk(child, name)

        walk(d, None)
        return tax

    @classmethod
    def load(cls, path) -> "Taxonomy":
        return cls.from_dict(json.loads(Path(path).read_text()))


# -- title alias tables ------------------------------------------------------


def load_alias_table(path, taxonomy: Taxonomy | None = None) -> dict[str, str]:
    """Alias file: JSON object mapping title pattern -> class name."""
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, dict):
        raise TaxonomyError("alias table must be a JSON object")
    table = {}
    for pattern, cls in raw.items():
        cls_norm = normalize_name(cls)
        if taxonomy is not None and cls_norm not in taxonomy:
            raise TaxonomyError(f"alias target {cls!r} is not a known class")
        table[pattern] = cls_norm
    return table


def apply_alias(title: str, alias_table: dict[str, str]) -> str | None:
    """Longest normalized-substring match; ``None`` when nothing matches.

    Equal-length matches pointing at different classes raise; titles are
    never guessed.
    """
    title_norm = normalize_name(title)
    hits = []
    for pattern, cls in alias_table.items():
        pattern_norm = normalize_name(pattern)
        if pattern_norm and pattern_norm in title_norm:
            hits.append((len(pattern_norm), pattern_norm, cls))
    if not hits:
        return None
    best_len = max(h[0] for h in hits)
    best = sorted({(p, c) for ln, p, c in hits if ln == best_len})
    if len({c for _, c in best}) > 1:
        raise AmbiguousAliasError(title, best)
    return best[0][1]
