"""Shared record of acceptance outcomes, printed at the end of a pytest run."""

RESULTS: dict[tuple, str] = {}


def record(number: int, label: str, ok: bool, detail: str) -> str:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2} {label}: {detail}"
    RESULTS[(number, label)] = line
    print(line)
    return line
