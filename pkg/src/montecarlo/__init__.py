from .montecarlo import (
    DgpSpec,
    ProcessReport,
    Regime,
    SimulationReport,
    bahadur_discrepancy,
    convergence_study,
    deletion_gap,
    empirical_G,
    empirical_K,
    empirical_L,
    generate,
    normalization,
    replicate_rng,
    resolve_threads,
    run_experiment,
    simulate_processes,
    t_order_statistic_probe,
    tail_product_spread
    )

__all__ = [
    'DgpSpec',
    'ProcessReport',
    'Regime',
    'SimulationReport',
    'bahadur_discrepancy',
    'convergence_study',
    'deletion_gap',
    'empirical_G',
    'empirical_K',
    'empirical_L',
    'generate',
    'normalization',
    'replicate_rng',
    'resolve_threads',
    'run_experiment',
    'simulate_processes',
    't_order_statistic_probe',
    'tail_product_spread'
    ]
