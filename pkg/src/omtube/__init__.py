"""
omtube: most probable transitions of one-dimensional SDEs

Provides:
- Euler / theta-scheme simulation of dX = b(X) dt + c dW with seeded ensembles
- Brownian tube probabilities, Monte Carlo tube estimates and theorem bounds
- Onsager-Machlup, modified OM and Freidlin-Wentzell actions of discrete paths
- Most probable transition paths by shooting, and transition times by
  minimizing the modified action
- The transition-time vs tube-size experiment and figure reproduction
"""

__version__ = "0.1.0"
