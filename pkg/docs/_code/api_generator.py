"""Generate one API page per public module of jtnoma.

# https://mkdocstrings.github.io/recipes/
"""
from __future__ import annotations

from pathlib import Path

import mkdocs_gen_files

SRCDIR = Path("jtnoma").absolute().resolve()
ROOT = SRCDIR.parent

if not SRCDIR.exists():
    raise FileNotFoundError(f"{SRCDIR} does not exist, run mkdocs from the repository root.")

for path in sorted(SRCDIR.rglob("*.py")):
    module_path = path.relative_to(ROOT).with_suffix("")
    parts = module_path.parts
    if parts[-1] in ("__main__", "__init__") or any(p.startswith("_") for p in parts):
        continue

    doc_path = Path("api", path.relative_to(ROOT).with_suffix(".md"))
    with mkdocs_gen_files.open(doc_path, "w") as fd:
        fd.write(f"::: {'.'.join(parts)}")
    mkdocs_gen_files.set_edit_path(doc_path, path)
