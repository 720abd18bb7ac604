#!/usr/bin/env python3
"""Re-solve exported LMI problems with cvxpy and compare against `cdds analyze`.

For each system file the SDPA export of each theorem is read back, the margin
program  max t  s.t.  sum_i x_i F_i - F_0 >= t I (every block), ||x||_2 <= B
is solved with Clarabel, and the sign of the optimum and its value are
compared with the native solver's report.

usage: sdpa_crosscheck.py CDDS_EXECUTABLE SYSTEMS_DIR
"""

import json
import pathlib
import subprocess
import sys

import cvxpy as cp
import numpy as np

BOUND = 1e4
BAND = 1e-6


def parse_sdpa(text):
    tokens = []
    header = True
    for line in text.splitlines():
        if header and (not line.strip() or line[0] in '*"'):
            continue
        header = False
        for sep in ',(){}':
            line = line.replace(sep, ' ')
        tokens.extend(line.split())
    pos = 0

    def take():
        nonlocal pos
        pos += 1
        return tokens[pos - 1]

    mdim = int(take())
    nblock = int(take())
    sizes = [abs(int(take())) for _ in range(nblock)]
    for _ in range(mdim):
        take()
    f = [[np.zeros((s, s)) for s in sizes] for _ in range(mdim + 1)]
    while pos < len(tokens):
        mat, blk, i, j, v = int(take()), int(take()), int(take()), int(take()), float(take())
        f[mat][blk - 1][i - 1, j - 1] = v
        f[mat][blk - 1][j - 1, i - 1] = v
    return mdim, sizes, f


def margin(mdim, sizes, f):
    x = cp.Variable(mdim)
    t = cp.Variable()
    cons = [cp.norm(x, 2) <= BOUND]
    for b, s in enumerate(sizes):
        lhs = -f[0][b] + sum(x[i] * f[i + 1][b] for i in range(mdim))
        cons.append((lhs + lhs.T) / 2 - t * np.eye(s) >> 0)
    prob = cp.Problem(cp.Maximize(t), cons)
    prob.solve(solver=cp.CLARABEL)
    return float(t.value)


def run(cmd):
    return subprocess.run(cmd, capture_output=True, text=True)


def main():
    exe, systems = sys.argv[1], pathlib.Path(sys.argv[2])
    failures = 0
    checked = 0
    for path in sorted(systems.glob('*.json')):
        extra = ['--supply', 'custom'] if 'custom' in path.name else []
        for theorem in ('1', '2'):
            exported = run([exe, 'export', '--system', str(path), '--theorem', theorem] + extra)
            report = run([exe, 'analyze', '--system', str(path), '--theorem', theorem] + extra)
            if exported.returncode != 0:
                print(f'FAIL {path.name} T{theorem}: export exit {exported.returncode}')
                failures += 1
                continue
            native = json.loads(report.stdout)['theorems'][0]
            t_native = native['t_star']
            t_ref = margin(*parse_sdpa(exported.stdout))
            if abs(t_ref) < BAND or native['verdict'] == 'indeterminate':
                print(f'skip {path.name} T{theorem}: t*={t_ref:.3e} inside the margin band')
                continue
            checked += 1
            want = 'feasible' if t_ref > 0 else 'infeasible-within-bound'
            close = abs(t_ref - t_native) <= 1e-4 * (1 + abs(t_ref))
            ok = native['verdict'] == want and close
            failures += 0 if ok else 1
            print(f"{'ok  ' if ok else 'FAIL'} {path.name} T{theorem}: cvxpy t*={t_ref:.8g} "
                  f"cdds t*={t_native:.8g} verdict {native['verdict']}")
    print(f'{checked} problems compared, {failures} failures')
    return 1 if failures or checked == 0 else 0


if __name__ == '__main__':
    sys.exit(main())
