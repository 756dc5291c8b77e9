#!/usr/bin/env python
# encoding: utf-8
import argparse, logging, sys
from os.path import dirname, abspath

# Make sure parent is in the systempath
sys.path.insert(0, dirname(dirname(abspath(__file__))))

from popalloc.solver import MixedIntegerProgram, get_solver, read_lp  # noqa
from tests import conftest as utils  # noqa


if __name__ == '__main__':
    cmdline = argparse.ArgumentParser(description='Solve an LP file with a solver adapter')
    cmdline.add_argument('path', help='LP file to solve')
    cmdline.add_argument('-s', '--solver', default='embedded', help='Solver adapter (embedded or highs)')
    cmdline.add_argument('-v', '--verbose', default=False, action='store_true', help='Show verbose output')
    opts = cmdline.parse_args()
    logging.basicConfig(level=logging.DEBUG if opts.verbose else logging.WARNING)
    with open(opts.path) as handle:
        text = handle.read()
    program = read_lp(text)
    result = get_solver(opts.solver).solve(program, None)
    # Show Verbose output if requested
    if opts.verbose:
        print('\n-- PARSER --')
        utils.pprint_parser_node(None, text=text)
        print('\n-- PROGRAM --')
        lp = program.lp if isinstance(program, MixedIntegerProgram) else program
        utils.pprint_program(lp, result.primal)
    print('\n-- RESULT --' if opts.verbose else '')
    print(result)
