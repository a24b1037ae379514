"""Process exit codes shared by every management command."""

OK = 0
INFEASIBLE = 2
UNCONVERGED = 3
INVALID_INPUT = 4
GUARD_REFUSED = 5

DESCRIPTIONS = {
    OK: "success",
    INFEASIBLE: "no feasible allocation was found (or too many sweep drops failed)",
    UNCONVERGED: "the dual solver hit its iteration cap before the stopping rule held",
    INVALID_INPUT: "configuration, override or input file rejected",
    GUARD_REFUSED: "instance too large for brute-force enumeration",
}
