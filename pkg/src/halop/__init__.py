"""Optimal execution of large orders with limit prices.

A replay/synthetic limit-order-book simulator, hybrid discrete/continuous
policy distributions, a two-stage placement agent with a PPO trainer, and
the execution metrics to evaluate them.
"""

__version__ = "0.1.0"
