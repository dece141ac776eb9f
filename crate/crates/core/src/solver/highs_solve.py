"""Solve an MPS file with HiGHS and write a name/value solution file.

Usage: highs_solve.py MPS SOL TIME_LIMIT GAP THREADS

After a MIP incumbent is found, integer columns are fixed at their rounded
values and the LP is re-solved so continuous values are consistent with
exact integers.
"""

import sys

import highspy


def main():
    mps, sol, time_limit, gap, threads = sys.argv[1:6]
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("time_limit", float(time_limit))
    h.setOptionValue("mip_rel_gap", float(gap))
    h.setOptionValue("mip_feasibility_tolerance", 1e-9)
    h.setOptionValue("primal_feasibility_tolerance", 1e-9)
    if int(threads) > 0:
        h.setOptionValue("threads", int(threads))
    if h.readModel(mps) != highspy.HighsStatus.kOk:
        print("cannot read model", file=sys.stderr)
        return 3
    h.run()

    ms = h.getModelStatus()
    info = h.getInfo()
    has_point = info.primal_solution_status == 2
    S = highspy.HighsModelStatus
    if ms == S.kOptimal:
        status = "optimal"
    elif ms in (S.kInfeasible, S.kUnboundedOrInfeasible):
        status = "infeasible"
    elif ms in (S.kTimeLimit, S.kInterrupt, S.kIterationLimit, S.kSolutionLimit):
        status = "feasible" if has_point else "timelimit"
    else:
        status = "error"

    lines = ["@status " + status]
    if status in ("optimal", "feasible"):
        bound = info.mip_dual_bound
        lp = h.getLp()
        integrality = list(lp.integrality_) if len(lp.integrality_) else []
        values = list(h.getSolution().col_value)
        ints = [j for j, k in enumerate(integrality) if int(k) != 0]
        if ints:
            fixed = [float(round(values[j])) for j in ints]
            h.changeColsIntegrality(len(ints), ints, [highspy.HighsVarType.kContinuous] * len(ints))
            h.changeColsBounds(len(ints), ints, fixed, fixed)
            h.run()
            if h.getModelStatus() == S.kOptimal:
                values = list(h.getSolution().col_value)
                for j, v in zip(ints, fixed):
                    values[j] = v
        names = lp.col_names_
        obj = sum(c * v for c, v in zip(lp.col_cost_, values)) + lp.offset_
        lines.append("@objective %.12g" % obj)
        lines.append("@bound %.12g" % bound)
        for n, v in zip(names, values):
            if v != 0.0:
                lines.append("%s %.17g" % (n, v))
    with open(sol, "w") as f:
        f.write("\n".join(lines) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
