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

use thiserror::Error;

use crate::placement::BlockAddress;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("orthogonal array: {0}")]
    OrthogonalArray(String),

    #[error("invalid code scheme: {0}")]
    Scheme(String),

    #[error("coder: {0}")]
    Coder(String),

    #[error("invalid cluster configuration: {0}")]
    Config(String),

    #[error("placement infeasible: {0}")]
    Infeasible(String),

    #[error("stripe {stripe} block {block} out of range")]
    OutOfRange { stripe: usize, block: usize },

    #[error("node {0} does not exist in this cluster")]
    NoSuchNode(BlockAddress),

    #[error("recovery: {0}")]
    Recovery(String),

    #[error("migration: {0}")]
    Migration(String),

    #[error("simulation: {0}")]
    Simulation(String),

    #[error("serialization: {0}")]
    Serde(String),
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Serde(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Serde(err.to_string())
    }
}
