"""Solve an LP/MIP file with HiGHS and print the optimum, for freezing in tests.

usage: python3 scripts/lp_oracle.py crates/core/tests/data/lp_instance.lp
"""
import sys

import highspy


def main(path):
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", 0.0)
    h.setOptionValue("mip_abs_gap", 0.0)
    h.setOptionValue("primal_feasibility_tolerance", 1e-10)
    h.readModel(path)
    h.run()
    print(h.modelStatusToString(h.getModelStatus()))
    print(repr(h.getInfo().objective_function_value))
    print("highspy", highspy.__version__ if hasattr(highspy, "__version__") else "")


if __name__ == "__main__":
    main(sys.argv[1])
