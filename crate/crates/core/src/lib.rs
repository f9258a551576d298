// Copyright 2026 The D3 Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Deterministic data distribution for erasure-coded storage on rack-based
//! clusters: orthogonal-array layouts, recovery planning, migration, and a
//! traffic simulator to compare against random and hash placement.

pub mod coder;
pub mod codes;
pub mod error;
pub mod experiment;
pub mod field;
pub mod gf256;
pub mod metrics;
pub mod migration;
pub mod oa;
pub mod par;
pub mod placement;
pub mod recovery;
pub mod simnet;

pub use codes::{BlockClass, CodeScheme, StripeGrouping};
pub use error::{Error, Result};
pub use oa::{AddressingTable, OrthogonalArray};
pub use par::Execution;
pub use placement::{BlockAddress, ClusterConfig, D3Layout, PlacementMap, Placer};
