"""Library for turning finite-domain unsatisfiability proofs into step-wise explanations.

The package is organized around a small constraint language (:mod:`proofseq.model`),
a flattening pass that lowers user models to solver form with provenance
(:mod:`proofseq.flatten`), a line-oriented proof format with trimming and validity
checking (:mod:`proofseq.proofcore`), an embedded finite-domain oracle and prover
(:mod:`proofseq.oracle`, :mod:`proofseq.prover`), MUS extraction (:mod:`proofseq.mus`)
and the explanation pipeline itself (:mod:`proofseq.pipeline`).
"""

__version__ = "0.1.0"
