# encoding: utf-8
import re, time
import numpy as np
from contextlib import contextmanager

NONE = ('none', 'null')
# Instance sizes and solver caps: num_commodities=20k, node_cap=1.5M
COUNT_UNITS = {'k': 1e3, 'm': 1e6}
# Solver time limits, also read from POP_SOLVER_TIME_LIMIT
TIME_UNITS = {'ms': 1e-3, 's': 1.0, 'sec': 1.0, 'm': 60.0, 'min': 60.0, 'h': 3600.0}
QUANTITY = re.compile(r'^([-+]?(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:e[-+]?[0-9]+)?)\s*([a-z]*)$')


def parse_quantity(valuestr, units):
    """ Number with an optional suffix from units: 2.5k, 90s, 1e4. Suffixes
        are case-insensitive, so 1.5M and 1.5m are the same count.
    """
    match = QUANTITY.match(str(valuestr).strip().lower())
    if not match:
        raise ValueError(f"Unknown number format '{valuestr}'")
    value, unit = match.groups()
    if unit and unit not in units:
        raise ValueError(f"Unknown unit '{unit}' in '{valuestr}'")
    return float(value) * units.get(unit, 1.0)


def is_none(valuestr):
    """ Returns true if the value is a None string. """
    return valuestr is None or str(valuestr).lower() in NONE


def is_quantity(valuestr, units=COUNT_UNITS):
    """ Returns true if parse_quantity accepts valuestr. """
    try:
        parse_quantity(valuestr, units)
        return True
    except ValueError:
        return False


def split_list(valuestr, mod=None):
    """ Split a comma separated string (or pass a list through) and apply
        mod to every item. Used for k lists and size lists on the command line.
    """
    if isinstance(valuestr, (list, tuple)):
        items = list(valuestr)
    else:
        items = [x.strip() for x in str(valuestr).split(',') if x.strip()]
    return [mod(x) if mod else x for x in items]


def rng(seed):
    """ Seeded numpy generator; every random choice in the package goes through here. """
    return np.random.default_rng(seed)


def ms(seconds):
    return seconds * 1000.0


@contextmanager
def timer():
    """ Measure wall-clock seconds of the with block.
        Usage: with timer() as t: ...; t.elapsed
    """
    class _Elapsed:
        elapsed = 0.0
    result = _Elapsed()
    start = time.perf_counter()
    try:
        yield result
    finally:
        result.elapsed = time.perf_counter() - start
