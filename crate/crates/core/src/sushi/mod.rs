//! Sushi preference data, rho-regret, user trees and warm-started sessions.

pub mod data;
pub mod regret;
pub mod session;
pub mod synthetic;
pub mod user_tree;

pub use data::{
    item_schema, load_sushi_data, ranking_to_comparisons, user_schema, write_sushi_data, SushiData,
    SushiDataError, SushiItem, SushiUser, UserRanking,
};
pub use regret::{kendall_tau_b, rho_regret, rho_regret_by_position};
pub use session::{
    run_cold_sessions, run_warm_start_experiment, simulate_user, warm_start_session, SessionConfig,
    UserCurve, WarmStart, WarmStartConfig, WarmStartReport,
};
pub use user_tree::{grow_user_tree, user_split_gain, UserRecord, UserTree, UserTreeConfig};
