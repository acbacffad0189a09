#!/usr/bin/env python3
"""Prepend the Apache-2.0 header to project sources. Safe to re-run."""

import argparse
import pathlib

HEADER = """Copyright 2026 The gentse Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License."""

SOURCE_DIRS = ["core", "tools", "tests", "benchmarks"]
SLASH = {".cc", ".h", ".in"}
HASH = {".sh", ".py", ".cmake"}
MARKER = "Licensed under the Apache License"


def comment_style(path):
    if path.name == "CMakeLists.txt":
        return "#"
    if path.suffix == ".in":
        return "#" if path.name.endswith(".cmake.in") else "//"
    if path.suffix in SLASH:
        return "//"
    if path.suffix in HASH:
        return "#"
    return None


def render(prefix):
    return "".join(f"{prefix} {line}".rstrip() + "\n" for line in HEADER.splitlines())


def apply(path, prefix):
    text = path.read_text()
    if MARKER in text[:2000]:
        return False
    block = render(prefix) + "\n"
    if text.startswith("#!"):
        shebang, _, rest = text.partition("\n")
        text = shebang + "\n" + block + rest
    else:
        text = block + text
    path.write_text(text)
    return True


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("root", nargs="?", default=pathlib.Path(__file__).resolve().parent.parent, type=pathlib.Path)
    args = parser.parse_args()
    files = [args.root / "CMakeLists.txt"]
    for d in SOURCE_DIRS:
        files += sorted(p for p in (args.root / d).rglob("*") if p.is_file())
    changed = 0
    for path in files:
        prefix = comment_style(path)
        if prefix and apply(path, prefix):
            changed += 1
    print(f"{changed} file(s) updated")


if __name__ == "__main__":
    main()
