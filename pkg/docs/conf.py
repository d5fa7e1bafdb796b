# Sphinx configuration for the swarmcast docs.

import os
import sys

sys.path.insert(0, os.path.abspath(".."))

project = "swarmcast"
author = "Knowledge Innovation Centre"
release = "0.1.0"

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.napoleon",
    "sphinx_autodoc_typehints",
]

exclude_patterns = ["_build"]

html_theme = "sphinx_rtd_theme"

# Docstrings are Google style; types come from annotations.
napoleon_google_docstring = True
napoleon_numpy_docstring = False

autodoc_member_order = "bysource"
autodoc_default_options = {
    "members": True,
    "undoc-members": False,
}
