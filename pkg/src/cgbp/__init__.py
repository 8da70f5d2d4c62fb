"""Column generation and branch-and-price for block-angular integer programs."""
from .branch_price import BpConfig, BpResult, run_bp
from .colgen import CgConfig, CgResult, RepairFailed, lagrangian_bound, round_to_integer, run_cg
from .lp_core import LpConfig, LpProblem, LpSolution, LpStatus, solve_lp, verify_kkt
from .master import Column, init_rmp, solve_lrmp
from .model import Block, CompactModel, IntegerSolution, Row, Variable, validate, verify_solution
from .oracle import brute_force_mip, enumerate_extreme_points, full_column_lp
from .pricing import PricerResult, knapsack_dp, k_shortest_paths, price_block, rcsp_label_setting

__version__ = "0.1.0"
