all_main_examples = {  # Used for printing in python -m jtnoma_examples
    "basic_usage": ["solve_instance", "compare_schemes", "small_sweep", "analyse"],
    "efficiency": ["oracle_check", "fixed_lambda"],
    "declarative_usage": ["run_scenario"],
}

core_examples = [  # Run locally and on github actions
    "basic_usage/small_sweep",  # NOTE: This needs to be first for some tests to work
    "basic_usage/analyse",
    "basic_usage/solve_instance",
    "basic_usage/compare_schemes",
    "efficiency/oracle_check",
]

ci_examples = [  # Run on github actions
    "efficiency/fixed_lambda",
    "declarative_usage/run_scenario",
]
