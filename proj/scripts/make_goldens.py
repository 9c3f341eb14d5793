#!/usr/bin/env python3
"""Regenerate the rendered prompt goldens from the template fixtures.

Deliberately a second, trivial implementation of placeholder substitution so
the C++ renderer is checked against an independent route.
"""
import json
import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "prompts" / "fixtures"
BINDINGS = ROOT / "tests" / "data" / "golden_bindings.json"
OUT = ROOT / "tests" / "data" / "golden"


def render(template: str, bindings: dict) -> str:
    out = template
    for name, value in bindings.items():
        out = out.replace("{{" + name + "}}", value)
    if "{{" in out:
        raise SystemExit(f"unresolved placeholder remains: {out[out.index('{{'):][:40]!r}")
    return out


def main() -> int:
    bindings = json.loads(BINDINGS.read_text(encoding="utf-8"))
    OUT.mkdir(parents=True, exist_ok=True)
    for path in sorted(FIXTURES.glob("*.txt")):
        template_id = path.stem
        if template_id not in bindings:
            raise SystemExit(f"no canonical bindings for template {template_id}")
        body = path.read_text(encoding="utf-8")
        if body.endswith("\n"):  # a file's single trailing newline is not part of the body
            body = body[:-1]
        rendered = render(body, bindings[template_id])
        (OUT / f"{template_id}.golden.txt").write_bytes(rendered.encode("utf-8"))
        print(f"wrote {template_id}.golden.txt ({len(rendered)} bytes)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
