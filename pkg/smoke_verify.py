import time

from efflang.desugar import load_program
from efflang.theories import make_interpretation
from efflang.verify import verify_handler, classify_simple, NotSimple

CASES = []

CASES.append(("temporary-state", """
base loc = { l1, l2 }
use read_only_state
interpret nat = 3
handler temp(n : nat) : F nat = {
  get!(l)(k) -> #k(n)
}
""", "temp", "read_only_state", "correct", "trs"))

CASES.append(("catch over destructive", """
base loc = { l1, l2 }
base exc = { err }
use destructive_exceptions
interpret nat = 2
handler catch : F nat = {
  raise!(e)(k) -> return 10
}
""", "catch", "destructive_exceptions", "incorrect", None))

CASES.append(("rollback", """
base loc = { l0 }
base exc = { err }
use destructive_exceptions
interpret nat = 2
handler rollback(n_init : nat, m : U (exc -> F nat)) : F nat = {
  raise!(e)(k) -> set!((l0, n_init))((force m) e)
}
""", "rollback", "destructive_exceptions", "correct", "trs"))

CASES.append(("ccs relabel", """
base name = { a, b }
use ccs
fun bar : lab -> lab {
  snd(a) -> rcv(a), snd(b) -> rcv(b), rcv(a) -> snd(a), rcv(b) -> snd(b)
}
fun eq_lab : lab * lab -> bool {
  (snd(a), snd(a)) -> true(()), (snd(a), snd(b)) -> false(()),
  (snd(a), rcv(a)) -> false(()), (snd(a), rcv(b)) -> false(()),
  (snd(b), snd(a)) -> false(()), (snd(b), snd(b)) -> true(()),
  (snd(b), rcv(a)) -> false(()), (snd(b), rcv(b)) -> false(()),
  (rcv(a), snd(a)) -> false(()), (rcv(a), snd(b)) -> false(()),
  (rcv(a), rcv(a)) -> true(()), (rcv(a), rcv(b)) -> false(()),
  (rcv(b), snd(a)) -> false(()), (rcv(b), snd(b)) -> false(()),
  (rcv(b), rcv(a)) -> false(()), (rcv(b), rcv(b)) -> true(())
}
handler relabel(l : lab, m : lab) : F 0 = {
  prefix!(a)(k) -> match a with {
      tau(u) -> #k(())
    | vis(c) -> if eq_lab((c, l)) then prefix!('vis(m))(#k(()))
                else if eq_lab((c, bar(l))) then prefix!('vis(bar(m)))(#k(()))
                else prefix!('vis(c))(#k(()))
  }
}
""", "relabel", "ccs", "correct", "instances+models"))

CASES.append(("wrong state discarder", """
base loc = { l1 }
use state
interpret nat = 2
handler discard : F nat = {
  get!(l)(k) -> #k(0)
| set!(p)(k) -> #k(())
}
""", "discard", "state", "incorrect", "trs"))

CASES.append(("choose first projection", """
use nondeterminism
interpret nat = 2
handler first : F nat = {
  choose!(u)(k) -> #k('1(()))
}
""", "first", "nondeterminism", "incorrect", None))

for label, src, hname, tname, want_status, want_method in CASES:
    t0 = time.time()
    try:
        env = load_program(src, label)
        hd = env.handlers[hname]
        th = env.theories[tname]
        table = classify_simple(env, hd)
        kind = "simple" if not isinstance(table, NotSimple) else f"not simple ({table.reason})"
        v = verify_handler(env, hd, th)
    except Exception as e:
        import traceback
        traceback.print_exc()
        print(f"FAIL {label}: {type(e).__name__}: {e}")
        continue
    dt = time.time() - t0
    ok = v.status == want_status and (want_method is None or v.method == want_method)
    flag = "ok  " if ok else "FAIL"
    print(f"{flag} {label}: {v.status} via {v.method} in {dt:.2f}s [{kind}]")
    for ev in v.evidence:
        print(f"      {ev}")
    if v.witness is not None:
        w = v.witness
        print(f"      witness {w.kind}: eq#{w.equation_index} {w.equation}")
        print(f"        instance: {w.instance}")
        print(f"        lhs {w.lhs}  ~~>  {w.lhs_normal}")
        print(f"        rhs {w.rhs}  ~~>  {w.rhs_normal}")
        if w.detail:
            print(f"        {w.detail}")
