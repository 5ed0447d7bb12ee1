"""Collects one pass/fail line per acceptance criterion for the terminal summary."""
RESULTS = []


def report(name, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
    RESULTS.append(line)
    print(line, flush=True)
    return ok
