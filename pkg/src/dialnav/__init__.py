"""Cooperative dialog-navigation simulation and benchmarking framework.

A Navigator moves on a house graph toward a goal region it cannot see,
asking a remote Guide for directions; the Guide knows the house and goal
but must first localize the Navigator from its questions. This package
hosts the environment graphs, the turn-taking engine, built-in baseline
policies, the wire protocol for remote agents, the episode data model,
and the full metric suite.
"""

__version__ = "0.1.0"
