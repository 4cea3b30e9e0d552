#!/usr/bin/env python
"""Regenerate ``source/api_reference`` from the contchoreo package tree.

Run from the ``docs`` directory. Stale ``.rst`` files whose module disappeared are
removed before the tree is written again.
"""
from importlib import import_module
from io import StringIO
import os
import pkgutil
from shutil import rmtree

import contchoreo

DOC_TITLE = "API Reference"
DOC_BASE_PATH = "source/api_reference"

#: Sub-packages documented on their own index page, in reading order.
SUBPACKAGES = ("core", "utils")
#: Top level modules, ordered from the numerics outwards to the command line.
MODULES = (
    "continuum",
    "action",
    "minimize",
    "nbody",
    "command",
    "conf",
    "exceptions",
    "logging",
    "tracing",
)


def title_for(name: str, module) -> str:
    """``name - first docstring line`` when the module has a docstring."""
    if module.__doc__:
        return f"{name} - {module.__doc__.strip().splitlines()[0].rstrip('.')}"
    return name


def heading(text: str) -> str:
    return f"{text}\n{'=' * len(text)}\n\n"


def automodule(path: str, init: bool = True) -> str:
    body = f".. automodule:: {path}\n   :members:\n   :undoc-members:\n"
    if init:
        body += "   :special-members: __init__\n"
    return body


def write(path: str, content: str):
    print(f"> {path}")
    with open(path, "w") as f:
        f.write(content)


def write_module(directory: str, module_path: str):
    name = module_path.rsplit(".", 1)[-1]
    rst = StringIO("", newline="\n")
    rst.write(heading(title_for(name, import_module(module_path))))
    rst.write(automodule(module_path))
    write(os.path.join(directory, f"{name}.rst"), rst.getvalue())


def write_subpackage(name: str):
    package_path = f"{contchoreo.__name__}.{name}"
    package = import_module(package_path)
    directory = os.path.join(DOC_BASE_PATH, name)
    os.makedirs(directory, exist_ok=True)

    children = sorted(
        info.name for info in pkgutil.iter_modules(package.__path__) if not info.ispkg
    )
    index = StringIO("", newline="\n")
    index.write(heading(title_for(name, package)))
    index.write(".. toctree::\n   :maxdepth: 2\n\n")
    for child in children:
        index.write(f"   {child}\n")
        write_module(directory, f"{package_path}.{child}")
    index.write("\n" + automodule(package_path, init=False))
    write(os.path.join(directory, "index.rst"), index.getvalue())


def write_root():
    index = StringIO("", newline="\n")
    index.write(heading(DOC_TITLE))
    index.write(".. toctree::\n   :maxdepth: 2\n\n")
    for name in SUBPACKAGES:
        index.write(f"   {name}/index\n")
    for name in MODULES:
        index.write(f"   {name}\n")
        write_module(DOC_BASE_PATH, f"{contchoreo.__name__}.{name}")
    index.write("\n" + automodule(contchoreo.__name__, init=False))
    write(os.path.join(DOC_BASE_PATH, "index.rst"), index.getvalue())


if __name__ == "__main__":
    if os.path.isdir(DOC_BASE_PATH):
        print(f"Cleaning up {DOC_BASE_PATH}")
        rmtree(DOC_BASE_PATH)
    os.makedirs(DOC_BASE_PATH)

    for name in SUBPACKAGES:
        write_subpackage(name)
    write_root()
