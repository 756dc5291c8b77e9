# encoding: utf-8
from .exceptions import ConfigError
from . import utils


def boolean(valuestr):
    if isinstance(valuestr, bool):
        return valuestr
    if str(valuestr).lower() in ('true', 't', 'yes', 'y', '1'):
        return True
    elif str(valuestr).lower() in ('false', 'f', 'no', 'n', '0'):
        return False
    raise ConfigError(f"Invalid boolean value '{valuestr}'")


def duration(valuestr):
    """ Convert a solver time limit such as 1h, 5m, 30s, 250ms to seconds. """
    if isinstance(valuestr, (int, float)):
        return float(valuestr)
    try:
        return utils.parse_quantity(valuestr, utils.TIME_UNITS)
    except Exception:
        raise ConfigError(f"Unknown duration format '{valuestr}'")


def integer(valuestr):
    """ Convert valuestr such as 5k or 20000 to an int. """
    result = num(valuestr)
    if float(result) != int(result):
        raise ConfigError(f"Expected an integer, got '{valuestr}'")
    return int(result)


def num(valuestr):
    """ Convert a size or cap such as 20k, 1.5M, 2e4 to a number. """
    if isinstance(valuestr, (int, float)):
        return valuestr
    try:
        result = utils.parse_quantity(valuestr, utils.COUNT_UNITS)
        return int(result) if float(result).is_integer() else result
    except Exception:
        raise ConfigError(f"Unknown number format '{valuestr}'")


def percent(valuestr):
    """ Convert valuestr such as 5% to 0.05; plain numbers pass through as fractions. """
    if isinstance(valuestr, (int, float)):
        return float(valuestr)
    try:
        value = valuestr.strip()
        if value[-1] == '%':
            return float(value[:-1]) / 100
        return float(value)
    except Exception:
        raise ConfigError(f"Invalid percent format '{valuestr}'")


def optional(mod):
    """ Wrap a modifier so none/null strings map to None. """
    def _optional(valuestr):
        return None if utils.is_none(valuestr) else mod(valuestr)
    return _optional
