#!/usr/bin/env python3
"""Freeze a manifest of the sample KB for the test suite.

Deliberately does NOT import the package: this is a second, naive reading
of the KB file (plain text splitting, no unit parsing) so the loader's
per-attribute index is checked against an independent extraction rather
than against itself.

Usage: python3 scripts/build_kb_manifest.py [kb_path] [out_path]
"""
import json
import sys
from pathlib import Path


def main() -> int:
    root = Path(__file__).resolve().parent.parent
    kb_path = Path(sys.argv[1]) if len(sys.argv) > 1 else root / "src/fermibench/data/sample_kb.txt"
    out_path = Path(sys.argv[2]) if len(sys.argv) > 2 else root / "tests/fixtures/kb_manifest.json"

    by_attr: dict[str, set] = {}
    names: set[str] = set()
    for lineno, raw in enumerate(kb_path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split("|")]
        if len(parts) != 4:
            raise SystemExit(f"{kb_path}:{lineno}: expected 4 fields, got {len(parts)}")
        name, attr = parts[0], parts[1].lower()
        names.add(name)
        by_attr.setdefault(attr, set()).add(name)

    manifest = {
        "kb_file": kb_path.name,
        "object_count": len(names),
        "attributes": {attr: sorted(members) for attr, members in sorted(by_attr.items())},
    }
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {out_path} ({len(names)} objects, {len(by_attr)} attributes)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
