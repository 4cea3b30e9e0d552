# Sphinx configuration for the contchoreo documentation.
#
# https://www.sphinx-doc.org/en/master/usage/configuration.html
import os
import sys

# autodoc imports the package from the checkout rather than an installed copy
sys.path.insert(0, os.path.abspath("../.."))

from contchoreo import __version__  # noqa: E402

# -- Project information -----------------------------------------------------

project = "contchoreo"
copyright = "2026, contchoreo authors"
author = "contchoreo authors"
version = __version__
release = __version__


# -- General configuration ---------------------------------------------------

extensions = [
    # parse documentation from doc strings
    "sphinx.ext.autodoc",
    # google style Args/Raises/Returns sections
    "sphinx.ext.napoleon",
    # docstrings carry formulas such as ``ω²(N)`` and ``Δ^μ``
    "sphinx.ext.mathjax",
    # include type hints into the documentation so you don't have to explicitly
    # document them in the docstring
    "sphinx_autodoc_typehints",
    # link numpy, scipy and pydantic types to their own documentation
    "sphinx.ext.intersphinx",
]

autodoc_member_order = "bysource"
# the optional tracing extra may be missing where the docs are built
autodoc_mock_imports = ["opentelemetry"]

napoleon_google_docstring = True
napoleon_numpy_docstring = False

intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable/", None),
    "scipy": ("https://docs.scipy.org/doc/scipy/", None),
    "pydantic": ("https://docs.pydantic.dev/1.10/", None),
}

templates_path = ["_templates"]
exclude_patterns = []


# -- Options for HTML output -------------------------------------------------

html_theme = "press"
html_title = f"contchoreo {__version__}"
html_static_path = ["_static"]
