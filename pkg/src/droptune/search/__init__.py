"""Search strategies over annotation spaces and sketch sets."""

from droptune.search.baselines import (GAParams, genetic_search, grid_search, random_search,
                                       surrogate_search)
from droptune.search.droplet import droplet_search
from droptune.search.explore import ExploreReport, combined_tune, evolutionary_explore
from droptune.search.tracker import (SearchBudget, SearchReport, Session, TrialLog, Tracker,
                                     best_of)

__all__ = [
    "ExploreReport", "GAParams", "SearchBudget", "SearchReport", "Session", "Tracker",
    "TrialLog", "best_of", "combined_tune", "droplet_search", "evolutionary_explore",
    "genetic_search", "grid_search", "random_search", "surrogate_search",
]
