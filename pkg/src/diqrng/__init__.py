"""Simulator and certification toolkit for an entanglement-based QRNG.

Modules:
    qmath      -- two-qubit states, Pauli/correlation decompositions, Jacobi eigensolver
    source     -- HOM + quantum-eraser photon-pair source simulator
    tomography -- LS / MLE / Bayesian density-matrix estimators
    certify    -- CHSH (direct and Horodecki bound) and min-entropy
    extract    -- word-packed Toeplitz randomness extraction
    statsuite  -- the 15 SP 800-22 statistical tests plus KS aggregation
    pipeline   -- config-driven end-to-end runs (dataset_A / dataset_B presets)
    cli        -- command-line entry points
"""

__version__ = "0.1.0"
