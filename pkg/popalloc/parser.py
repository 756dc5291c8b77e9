# encoding: utf-8
"""
Grammar for the LP text format written by solver.lpformat.write_lp:

    Maximize
     obj: + 1 x0 + 2 x1
    Subject To
     c0: + 1 x0 + 1 x1 <= 4
    Bounds
     0 <= x0 <= 1
     x1 free
    Generals
     x1
    End
"""
from pyparsing import CaselessKeyword, Group, Optional, Regex
from pyparsing import Suppress, StringEnd, OneOrMore, ZeroOrMore
from pyparsing import Word, alphanums, alphas, oneOf

MAXIMIZE = CaselessKeyword('maximize') | CaselessKeyword('maximum') | CaselessKeyword('max')
MINIMIZE = CaselessKeyword('minimize') | CaselessKeyword('minimum') | CaselessKeyword('min')
SUBJECTTO = CaselessKeyword('subject to') | CaselessKeyword('such that') | CaselessKeyword('st')
BOUNDS = CaselessKeyword('bounds')
GENERALS = CaselessKeyword('generals') | CaselessKeyword('general') | CaselessKeyword('integers')
BINARIES = CaselessKeyword('binaries') | CaselessKeyword('binary')
FREE = CaselessKeyword('free')
INFINITY = CaselessKeyword('infinity') | CaselessKeyword('inf')
END = CaselessKeyword('end')
KEYWORD = MAXIMIZE | MINIMIZE | SUBJECTTO | BOUNDS | GENERALS | BINARIES | FREE | INFINITY | END


def _signed(tokens):
    """ Fold an optional sign into the number that follows it. """
    sign = -1.0 if len(tokens) == 2 and tokens[0] == '-' else 1.0
    return sign * tokens[-1]


# Names, numbers and signed values
name = ~KEYWORD + Word(alphas + '_', alphanums + '_.[]')
unsigned = Regex(r'[0-9]+\.?[0-9]*([eE][+-]?[0-9]+)?|\.[0-9]+([eE][+-]?[0-9]+)?')
unsigned.setParseAction(lambda t: float(t[0]))
infinity = INFINITY.copy().setParseAction(lambda t: float('inf'))
sign = oneOf('+ -')
number = (Optional(sign) + unsigned).setParseAction(_signed)
bound_value = (Optional(sign) + (unsigned | infinity)).setParseAction(_signed)
relation = oneOf('<= >= =< => = < >')

# Linear expressions
term = Group(Optional(sign, default='+') + Optional(unsigned, default=1.0) + name)
expression = Group(OneOrMore(term)).setResultsName('expression')
# Unlabelled rows carry no 'label' key
label = Optional(Word(alphas + '_', alphanums + '_.[]').setResultsName('label') + Suppress(':'))

# Sections
sense = (MAXIMIZE | MINIMIZE).setResultsName('sense')
objective = Group(label + Optional(expression)).setResultsName('objective')
constraint = Group(label + expression + relation.setResultsName('relation') + number.setResultsName('rhs'))
constraints = Suppress(SUBJECTTO) + Group(ZeroOrMore(constraint)).setResultsName('constraints')
ranged_bound = Group(bound_value + relation + name + relation + bound_value).setResultsName('ranged')
free_bound = Group(name + Suppress(FREE)).setResultsName('free')
single_bound = Group(name + relation + bound_value).setResultsName('single')
bound = Group(ranged_bound | free_bound | single_bound)
bounds = Optional(Suppress(BOUNDS) + Group(ZeroOrMore(bound)).setResultsName('bounds'))
generals = Optional(Suppress(GENERALS) + Group(ZeroOrMore(name)).setResultsName('generals'))
binaries = Optional(Suppress(BINARIES) + Group(ZeroOrMore(name)).setResultsName('binaries'))

# LPFile - Final parser object; backslash comments run to end of line
LPFile = sense + objective + constraints + bounds + generals + binaries + Optional(Suppress(END)) + StringEnd()
LPFile.ignore(Regex(r'\\[^\n]*'))
