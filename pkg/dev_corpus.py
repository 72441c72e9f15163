"""Scratch harness for authoring corpus files.  Not a deliverable.

Usage: python3 dev_corpus.py FILE [handler theory]...
Prints the type of every definition, renders main's tree, and (for each
handler/theory pair given) prints the verdict.
"""
import sys

from efflang.desugar import load_program
from efflang.typecheck import check_program
from efflang.printer import print_ctype
from efflang.interpreter import Evaluator, Fuel, as_tree, format_tree
from efflang.theories import make_interpretation
from efflang.verify import verify_handler


def main():
    path = sys.argv[1]
    src = open(path).read()
    env = load_program(src, path)
    types = check_program(env)
    for name, t in types.items():
        print(f"type  {name} : {print_ctype(t)}")
    interp = make_interpretation(env)
    if env.main is not None:
        ev = Evaluator(env, fuel=Fuel(500_000))
        tree = as_tree(ev.run(env.main))
        print(f"main  {format_tree(tree, ev.interp)}")
    for name, (body, at) in env.defs.items():
        try:
            ev = Evaluator(env, fuel=Fuel(500_000))
            tree = as_tree(ev.run(body))
            print(f"def   {name} = {format_tree(tree, ev.interp)}")
        except Exception as e:
            print(f"def   {name} !! {type(e).__name__}: {e}")
    pairs = sys.argv[2:]
    for i in range(0, len(pairs), 2):
        hname, tname = pairs[i], pairs[i + 1]
        v = verify_handler(env, env.handlers[hname], env.theories[tname], interp)
        print(f"verify {hname} / {tname}: {v.status} via {v.method}")
        for e in v.evidence:
            print(f"        {e}")
        if v.witness is not None:
            w = v.witness
            print(f"        witness kind={w.kind} eq#{w.equation_index} {w.equation}")
            print(f"        inst={w.instance} lhs={w.lhs} rhs={w.rhs}")


if __name__ == "__main__":
    main()
