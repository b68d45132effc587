"""YAML loading that remembers where every value came from.

Schema errors in topology and experiment files should point at a line, so
documents are composed into PyYAML nodes first and converted by hand.
"""

import yaml

from .errors import SchemaViolation


def load(text, source="<document>"):
    """Parse ``text`` and return ``(data, lines)``.

    ``lines`` maps a path tuple (keys and list indices) to the 1-based line
    where that value starts.
    """
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise SchemaViolation(source, f"not valid YAML: {exc}", line) from None
    lines = {}
    if root is None:
        return {}, lines
    return _convert(root, (), lines), lines


def _convert(node, path, lines):
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for key_node, value_node in node.value:
            key = yaml.SafeLoader(" ").construct_object(key_node)
            if key in out:
                raise SchemaViolation(
                    dotted(path + (key,)), "duplicate key", key_node.start_mark.line + 1
                )
            out[key] = _convert(value_node, path + (key,), lines)
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_convert(item, path + (i,), lines) for i, item in enumerate(node.value)]
    return yaml.SafeLoader(" ").construct_object(node)


def dotted(path):
    parts = []
    for p in path:
        if isinstance(p, int):
            parts.append(f"[{p}]")
        else:
            parts.append(("." if parts else "") + str(p))
    return "".join(parts) or "<root>"


def check_keys(mapping, allowed, path, lines, required=()):
    """Reject unknown keys and missing required keys in ``mapping``."""
    if not isinstance(mapping, dict):
        raise SchemaViolation(dotted(path), "expected a mapping", lines.get(path))
    for key in mapping:
        if key not in allowed:
            raise SchemaViolation(
                dotted(path + (key,)), "unknown key", lines.get(path + (key,))
            )
    for key in required:
        if key not in mapping:
            raise SchemaViolation(
                dotted(path + (key,)), "required key missing", lines.get(path)
            )
