#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>
#include <audita/bytes.hpp>
#include <audita/crypto.hpp>
#include <audita/ledger.hpp>

// Deterministic simulator of the per-timestamp audit: election, a latency
// race among the elected storage nodes, block creation and acceptance, and
// per-file coverage tracking. Everything random is a hash of the master seed.
namespace audita::netsim {

    enum class sim_mode : std::uint8_t {
        full_crypto,
        coverage_only,
    };

    enum class adversary_kind : std::uint8_t {
        outsourcer,
        deleter,
        refuser,
    };

    enum class deleter_style : std::uint8_t {
        refuse,
        forge,
    };

    struct adversary {
        std::uint64_t node = 0;
        adversary_kind kind = adversary_kind::outsourcer;
        double extra_latency_ms = 0.0;
        double deleted_fraction = 0.0;
        deleter_style style = deleter_style::refuse;

        bool operator==(const adversary &) const = default;
    };

    struct late_join {
        std::uint64_t node = 0;
        std::uint64_t timestamp = 0;

        bool operator==(const late_join &) const = default;
    };

    struct sim_config {
        std::uint64_t n = 1024;
        std::uint64_t m = 256;
        std::uint64_t k = 10;
        std::uint64_t d = 16;
        std::uint64_t l = 1;
        std::uint64_t node_count = 100;
        std::uint64_t file_count = 1;
        byte_string master_seed { 0x00 };
        // PDP keys derive from this when set, so runs with different master
        // seeds can share file keys.
        std::optional<byte_string> file_seed;
        sim_mode mode = sim_mode::coverage_only;
        std::uint64_t max_timestamps = 100;
        std::uint64_t block_creators = 4;
        // Zero means l coins (one per winner).
        std::uint64_t alpha = 0;
        // Zero means max_timestamps.
        std::uint64_t store_duration = 0;
        std::uint64_t chunk_size = 16384;
        std::size_t modulus_bits = 1024;
        double latency_base_ms = 20.0;
        double latency_spread_ms = 20.0;
        double jitter_median_ms = 20.0;
        double jitter_sigma = 0.5;
        std::uint64_t max_retries = 32;
        std::vector<adversary> adversaries;
        std::vector<late_join> late_joins;

        bool operator==(const sim_config &) const = default;

        void validate() const;
        std::uint64_t effective_alpha() const noexcept;
        std::uint64_t effective_duration() const noexcept;
        // Median of an honest node's latency when the base spread and the
        // jitter are taken at their medians.
        double nominal_median_latency_ms() const noexcept;
        const adversary *adversary_for(std::uint64_t node) const noexcept;
    };

    sim_config parse_scenario(std::string_view text);
    sim_config load_scenario(const std::string &path);
    std::string format_scenario(const sim_config &cfg);

    struct race_entry {
        std::uint64_t node = 0;
        double arrival_ms = 0.0;
        // won, late, refused, data-loss, invalid-proof
        std::string outcome;
    };

    struct race_outcome {
        std::uint64_t timestamp = 0;
        std::uint64_t epoch = 0;
        std::uint64_t attempt = 0;
        std::vector<std::uint64_t> elected;
        std::vector<race_entry> responders;
        std::vector<std::uint64_t> winners;
        bool accepted = false;
        std::string rejection;
    };

    struct file_coverage {
        crypto::digest file_id;
        std::vector<bool> proven;
        std::uint64_t proven_count = 0;
        // Entry t is the fraction proven after timestamp t.
        std::vector<double> history;
    };

    struct node_tally {
        std::uint64_t rewards = 0;
        std::uint64_t failures = 0;
        std::uint64_t wins = 0;
        std::uint64_t elections = 0;
        std::uint64_t challenges = 0;
    };

    struct unrecoverable_chunk {
        std::uint64_t timestamp = 0;
        std::uint64_t node = 0;
        std::uint64_t file = 0;
        std::uint64_t chunk = 0;
    };

    struct reserve_event {
        std::uint64_t timestamp = 0;
        std::uint64_t node = 0;
        std::uint64_t file = 0;
        std::uint64_t chunk = 0;
        std::uint64_t served_by = 0;
    };

    struct sim_result {
        std::vector<crypto::sig_public_key> node_keys;
        std::vector<file_coverage> coverage;
        std::vector<node_tally> nodes;
        std::vector<race_outcome> log;
        std::vector<std::uint64_t> stalled_timestamps;
        std::vector<std::uint64_t> flagged_faulty;
        std::vector<reserve_event> reserved;
        std::vector<unrecoverable_chunk> unrecoverable;
        std::optional<ledger::ledger> chain;
        std::uint64_t total_rewards = 0;
        std::uint64_t proofs_generated = 0;
        std::uint64_t proofs_checked = 0;
    };

    sim_result run_simulation(const sim_config &cfg);

    std::string coverage_csv(const sim_result &r);
    std::string nodes_csv(const sim_result &r);
    std::string summary(const sim_config &cfg, const sim_result &r);

    struct adversary_stats {
        adversary who;
        std::uint64_t rewards = 0;
        double reward_share = 0.0;
        std::uint64_t challenges = 0;
        std::uint64_t failures = 0;
        double failure_rate = 0.0;
        bool flagged_faulty = false;
    };

    std::vector<adversary_stats> adversary_report(const sim_config &cfg, const sim_result &r);

    // Expected fraction proven after T timestamps when each of l winners
    // proves d chunks, each hitting a given chunk with probability d/n.
    double analytic_coverage(std::uint64_t n, std::uint64_t d, std::uint64_t l, std::uint64_t timestamps);
    // Smallest T with analytic_coverage >= target; at least 1.
    std::uint64_t solve_timestamps_for_coverage(std::uint64_t n, std::uint64_t d, std::uint64_t l, double target);

    // First timestamp whose coverage reaches target, if any.
    std::optional<std::uint64_t> crossing(const std::vector<double> &history, double target);

}
