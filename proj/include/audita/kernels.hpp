#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>
#include <gmpxx.h>
#include <audita/pdp.hpp>
#include <audita/protocol.hpp>

// Data-parallel kernels. Each comes as a serial reference and an OpenMP
// version; both produce identical results for identical input, which the
// tests assert. The parallel versions never let an exception escape a worker:
// failures are recorded per slot and rethrown or reported after the loop.
namespace audita::kernels {

    // Tags of chunk c, sector s land at out[c * S + s].
    std::vector<mpz_class> tag_sectors_serial(const pdp::keypair &keys, const protocol::file_layout &layout,
        byte_view padded_file);
    std::vector<mpz_class> tag_sectors_parallel(const pdp::keypair &keys, const protocol::file_layout &layout,
        byte_view padded_file);

    std::vector<std::vector<std::uint64_t>> assignment_batch_serial(std::span<const crypto::sig_public_key> nodes,
        std::uint64_t n, std::uint64_t m);
    std::vector<std::vector<std::uint64_t>> assignment_batch_parallel(std::span<const crypto::sig_public_key> nodes,
        std::uint64_t n, std::uint64_t m);

    // Monte Carlo of a prover missing t of its m blocks under a d-block
    // challenge. Trial j draws its missing set and its challenge from
    // hash(simulation, seed || j), so splitting trials across threads never
    // changes the count. A trial fails as soon as a challenged block is missing.
    struct detection_tally {
        std::uint64_t trials = 0;
        std::uint64_t failures = 0;

        double rate() const noexcept
        {
            return trials == 0 ? 0.0 : static_cast<double>(failures) / static_cast<double>(trials);
        }
    };

    detection_tally detection_trials_serial(std::uint64_t m, std::uint64_t t, std::uint64_t d, std::uint64_t trials,
        byte_view seed);
    detection_tally detection_trials_parallel(std::uint64_t m, std::uint64_t t, std::uint64_t d,
        std::uint64_t trials, byte_view seed);

    struct prove_job {
        const protocol::file_public_key *file;
        const crypto::sig_keypair *keys;
        const protocol::chunk_assignment *assignment;
    };

    struct prove_result {
        std::optional<protocol::possession_proof> proof;
        // Error kind when proving failed, e.g. "data-loss".
        std::string failure;
    };

    std::vector<prove_result> prove_batch_serial(std::span<const prove_job> jobs,
        const chain::identification_string &idstr, std::uint64_t d);
    std::vector<prove_result> prove_batch_parallel(std::span<const prove_job> jobs,
        const chain::identification_string &idstr, std::uint64_t d);

    struct verify_job {
        const protocol::file_public_key *file;
        const protocol::possession_proof *proof;
        std::span<const std::uint64_t> assignment;
    };

    std::vector<char> verify_batch_serial(std::span<const verify_job> jobs, const chain::identification_string &idstr,
        std::uint64_t d);
    std::vector<char> verify_batch_parallel(std::span<const verify_job> jobs,
        const chain::identification_string &idstr, std::uint64_t d);

}
