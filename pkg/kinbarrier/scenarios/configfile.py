"""
Reading scenario configuration files.

Format: one `key = value` per line, `#` starts a comment, `[section]`
headers prefix the following keys with "section.". Values are YAML
scalars or flow sequences, e.g.

    [grid]
    Nx = 12
    Lx = 4.
    [checks]
    names = [gradient_gronwall, stability]
    p = inf
"""
import logging
import re

import yaml

_log = logging.getLogger(__name__)

SECTION_RE = re.compile(r'^\[\s*([A-Za-z_][\w.]*)\s*\]$')
KEY_RE = re.compile(r'^[A-Za-z_][\w.]*$')


class ConfigFileError(Exception):
    """A line of a configuration file cannot be parsed."""

    def __init__(self, filename, lineno, reason):
        self.filename = filename
        self.lineno = lineno
        self.reason = reason

    def __str__(self):
        return f"{self.filename}, line {self.lineno}: {self.reason}"


def _strip_comment(line):
    """Remove a trailing comment, keeping '#' inside quotes."""
    quote = None
    for i, c in enumerate(line):
        if quote is not None:
            if c == quote:
                quote = None
        elif c in '\'"':
            quote = c
        elif c == '#':
            return line[:i]
    return line


def parse_value(text):
    value = yaml.safe_load(text)
    if isinstance(value, str) and value.lower() in ('inf', '+inf', '-inf'):
        return float(value)
    return value


def parse_lines(lines, filename='<string>'):
    """Return a dict of dotted keys to values.

    Repeated keys are an error.
    """
    result = {}
    prefix = ''
    for lineno, raw in enumerate(lines, start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        match = SECTION_RE.match(line)
        if match:
            prefix = match.group(1) + '.'
            continue
        key, sep, text = line.partition('=')
        key = key.strip()
        if not sep or not KEY_RE.match(key):
            raise ConfigFileError(filename, lineno, f"expected 'key = value', got '{raw.rstrip()}'")
        key = prefix + key
        if key in result:
            raise ConfigFileError(filename, lineno, f"key '{key}' given twice")
        try:
            result[key] = parse_value(text.strip())
        except yaml.YAMLError as exc:
            raise ConfigFileError(filename, lineno, f"cannot parse value of '{key}'") from exc
    return result


def read_config_file(filename):
    with open(filename) as fp:
        entries = parse_lines(fp, filename=filename)
    _log.debug("Read %d entries from '%s'.", len(entries), filename)
    return entries


def split_blocks(entries):
    """Group dotted keys by their first component: {'grid.Nx': 12} -> {'grid': {'Nx': 12}}.

    Inner dots become underscores ('regime.M1.C' -> 'M1_C'); keys without a
    block go into the block ''.
    """
    blocks = {}
    for key, value in entries.items():
        block, _, name = key.partition('.')
        if not name:
            block, name = '', block
        blocks.setdefault(block, {})[name.replace('.', '_')] = value
    return blocks
