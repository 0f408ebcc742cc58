"""Reduced configurations of every CLI experiment, small enough for repeated runs."""

SMALL = {
    "fbm-cov": {"n_mc": 200, "grid": {"n_steps": 16}, "h": [0.3, 0.75],
                "params": {"nodes": [0.25, 1.0]}},
    "fbm-sensitivity": {"n_mc": 4, "grid": {"n_steps": 32}, "h": [0.6]},
    "sde-solve": {"n_mc": 2, "grid": {"n_steps": 64}, "params": {"levels": [16, 32, 64]}},
    "sde-sensitivity": {"n_mc": 2, "grid": {"n_steps": 64}, "params": {"levels": [16, 32, 64]}},
    "law-lipschitz": {"n_mc": 50, "grid": {"n_steps": 32}},
    "fou-stationary": {"n_mc": 100, "grid": {"n_steps": 8}, "params": {"cases": [[2.0, 0.6]]}},
    "ergodic-avg": {"grid": {"t_max": 20.0, "n_steps": 400}, "h": [0.6]},
    "h-compare": {"n_mc": 4, "grid": {"t_max": 10.0, "n_steps": 80},
                  "params": {"checkpoints": [2.0, 5.0, 10.0]}},
    "hitting-laplace": {"n_mc": 50, "grid": {"t_max": 2.0, "n_steps": 128}},
    "levy-converge": {"n_mc": 2, "h": [0.6], "params": {"n_range": [3, 4, 5], "rho": 0.4}},
    "levy-diverge": {"n_mc": 8, "params": {"n_range": [3, 4, 5]}},
    "law-continuity": {"n_mc": 50, "grid": {"n_steps": 32}, "h": [0.4, 0.45]},
    "wiener-norm": {"n_mc": 200, "grid": {"n_steps": 16}, "h": [0.25, 0.7], "params": {"curve_points": [5, 9]}},
}
