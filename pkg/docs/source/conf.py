"""Sphinx configuration for the histonav documentation."""

import pathlib
import sys

# autodoc imports histonav from the repository checkout
sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[2]))

project = "histonav"
author = "histonav developers"
copyright = f"2024, {author}"
release = "1.0.0"

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.autosummary",
    "sphinx.ext.autosectionlabel",
    "sphinx.ext.napoleon",
    "sphinx_rtd_theme",
]
autosectionlabel_prefix_document = True
autodoc_member_order = "bysource"
napoleon_numpy_docstring = True
napoleon_google_docstring = False

html_theme = "sphinx_rtd_theme"
