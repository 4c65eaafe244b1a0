# Copyright 2026 The CDR Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Contrastive embeddings from consistency and discrepancy over tripartite graphs."""

from ._core import (
    Counts,
    Graph,
    MetricSet,
    PipelineConfig,
    TrainConfig,
    ValidationError,
    evaluate,
    load_graph,
    member_metrics,
    random_graph,
    run_cli,
    split,
    train,
    tuple_metrics,
)

__all__ = [
    "Counts",
    "Graph",
    "MetricSet",
    "PipelineConfig",
    "TrainConfig",
    "ValidationError",
    "evaluate",
    "load_graph",
    "member_metrics",
    "random_graph",
    "run_cli",
    "split",
    "train",
    "tuple_metrics",
]
