"""Effective-channel ranks for the three Rician configurations at M = N1 = N2 = 8."""

from symbiris.experiments.config import ExperimentConfig
from symbiris.experiments.runner import rank_table_rows
from symbiris.types import SystemConfig


def main():
    cfg = ExperimentConfig(scenario="RankTable", seeds=tuple(range(5)),
                           system=SystemConfig(M=8, N1=8, N2=8, K=16))
    for row in rank_table_rows(cfg):
        print(row)


if __name__ == "__main__":
    main()
