# Sphinx configuration for the tensorjl documentation.
from pathlib import Path
import sys


sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

project = "tensorjl"
copyright = "2026, datakurre"
author = "datakurre"
release = "0.1"

extensions = [
    "myst_parser",
    "sphinx.ext.autodoc",
    "sphinx.ext.mathjax",
]

exclude_patterns = ["_build"]
html_theme = "alabaster"

# Embedding formulas in the experiment notes use $...$.
myst_enable_extensions = [
    "colon_fence",
    "deflist",
    "dollarmath",
    "linkify",
]
myst_heading_anchors = 2

autodoc_member_order = "bysource"
autodoc_typehints = "description"
