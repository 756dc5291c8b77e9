# encoding: utf-8
"""
Debug dump of programs in the common LP text format so any external solver
can re-solve them, and a reader for the same files.
"""
import logging, re
from pyparsing.exceptions import ParseException
from .. import parser
from ..exceptions import SolverError
from .program import EQ, GE, INF, LE, MAX, MIN, LinearProgram, MixedIntegerProgram
log = logging.getLogger(__name__)

RELATIONS = {'<=': LE, '=<': LE, '<': LE, '>=': GE, '=>': GE, '>': GE, '=': EQ}


def _num(value):
    if value == INF: return '+inf'
    if value == -INF: return '-inf'
    return f'{value:.17g}'


def _expression(coeffs):
    terms = [f'{"-" if c < 0 else "+"} {_num(abs(c))} x{i}' for i, c in sorted(coeffs.items())]
    return ' '.join(terms) or '+ 0 x0'


def write_lp(program, path=None):
    """ Returns the program as LP text; also written to path when given. """
    mip = program if isinstance(program, MixedIntegerProgram) else None
    lp = mip.lp if mip else program
    lines = [f'\\ {lp}']
    lines += [f'\\ x{i}: {name}' for i, name in enumerate(lp.names)]
    lines.append('Maximize' if lp.sense == MAX else 'Minimize')
    lines.append(f' obj: {_expression(dict(enumerate(lp.objective)))}')
    lines.append('Subject To')
    for r, row in enumerate(lp.constraints):
        lines.append(f' c{r}: {_expression(row.coeffs)} {row.relation} {_num(row.rhs)}')
    lines.append('Bounds')
    for i, (lo, hi) in enumerate(zip(lp.lower, lp.upper)):
        if lo == -INF and hi == INF:
            lines.append(f' x{i} free')
        else:
            lines.append(f' {_num(lo)} <= x{i} <= {_num(hi)}')
    if mip and mip.integers:
        lines.append('Generals')
        lines += [f' x{i}' for i in sorted(mip.integers)]
    lines.append('End')
    text = '\n'.join(lines) + '\n'
    if path:
        with open(path, 'w') as handle:
            handle.write(text)
        log.debug(f'Wrote {lp} to {path}')
    return text


def read_lp(text):
    """ Parse LP text into a LinearProgram, or a MixedIntegerProgram when
        Generals or Binaries are present.
    """
    try:
        parsed = parser.LPFile.parseString(text)
    except ParseException as err:
        raise SolverError(f"Unknown symbol '{err.line[err.col-1:err.col]}' at line {err.lineno}")
    index = _variable_index(parsed)
    lp = LinearProgram(sense=MIN if parsed['sense'].lower().startswith('min') else MAX)
    for name in index:
        lp.add_variable(name)
    for sign, coef, name in parsed['objective'].get('expression', []):
        lp.objective[index[name]] += _coef(sign, coef)
    for row in parsed['constraints']:
        coeffs = {}
        for sign, coef, name in row['expression']:
            coeffs[index[name]] = coeffs.get(index[name], 0.0) + _coef(sign, coef)
        lp.add_constraint(coeffs, RELATIONS[row['relation']], row['rhs'], name=row.get('label') or None)
    for item in parsed.get('bounds', []):
        _apply_bound(lp, index, item[0])
    integers = set()
    for name in parsed.get('generals', []):
        integers.add(index[name])
    for name in parsed.get('binaries', []):
        integers.add(index[name])
        lp.lower[index[name]] = max(lp.lower[index[name]], 0.0)
        lp.upper[index[name]] = min(lp.upper[index[name]], 1.0)
    if integers:
        return MixedIntegerProgram(lp, frozenset(integers))
    return lp


def _coef(sign, coef):
    return -coef if sign == '-' else coef


def _variable_index(parsed):
    """ Variables in order of appearance; x<N> names keep their number order. """
    names = []
    for term in parsed['objective'].get('expression', []):
        names.append(term[2])
    for row in parsed['constraints']:
        names += [term[2] for term in row['expression']]
    for item in parsed.get('bounds', []):
        names += [tok for tok in item[0] if isinstance(tok, str) and tok not in RELATIONS]
    names += list(parsed.get('generals', [])) + list(parsed.get('binaries', []))
    unique = list(dict.fromkeys(names))
    if unique and all(re.fullmatch(r'x\d+', n) for n in unique):
        unique.sort(key=lambda n: int(n[1:]))
    return {name: i for i, name in enumerate(unique)}


def _apply_bound(lp, index, tokens):
    """ Apply one bound line: 'lo <= x <= hi', 'x free' or 'x <op> value'. """
    if len(tokens) == 1:
        lp.lower[index[tokens[0]]], lp.upper[index[tokens[0]]] = -INF, INF
    elif len(tokens) == 5:
        lo, _, name, _, hi = tokens
        lp.lower[index[name]], lp.upper[index[name]] = lo, hi
    else:
        name, relation, value = tokens
        relation = RELATIONS[relation]
        if relation in (LE, EQ):
            lp.upper[index[name]] = value
        if relation in (GE, EQ):
            lp.lower[index[name]] = value
        if relation == LE and value < 0 and lp.lower[index[name]] == 0:
            lp.lower[index[name]] = -INF
