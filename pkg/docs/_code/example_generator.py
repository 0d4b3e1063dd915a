"""Render the scripts of jtnoma_examples as documentation pages."""
from __future__ import annotations

from pathlib import Path

import mkdocs_gen_files

EXAMPLE_FOLDER = Path("jtnoma_examples").absolute().resolve()
EXAMPLE_INDEX = EXAMPLE_FOLDER / "README.md"

if not EXAMPLE_INDEX.exists():
    raise FileNotFoundError(f"{EXAMPLE_INDEX} does not exist, run mkdocs from the repository root.")

with mkdocs_gen_files.open(Path("examples", "index.md"), "w") as fd:
    fd.write(EXAMPLE_INDEX.read_text())
mkdocs_gen_files.set_edit_path(Path("examples", "index.md"), EXAMPLE_INDEX)

for path in sorted(EXAMPLE_FOLDER.glob("*/*")):
    if path.suffix not in (".py", ".yaml"):
        continue
    doc_path = Path("examples", path.parent.name, f"{path.stem}.md")
    language = "python" if path.suffix == ".py" else "yaml"
    # Quad backticks, the examples contain code blocks of their own.
    with mkdocs_gen_files.open(doc_path, "w") as fd:
        fd.write(f"````{language}\n{path.read_text()}\n````")
    mkdocs_gen_files.set_edit_path(doc_path, path)
