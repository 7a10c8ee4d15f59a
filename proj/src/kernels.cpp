#include <exception>
#include <audita/error.hpp>
#include <audita/kernels.hpp>

namespace audita::kernels {

    using crypto::hash_domain;

    namespace {
        // Runs body(i) for i in [0, count) on the OpenMP team and rethrows the
        // first captured exception after the loop.
        template<class Body>
        void parallel_for(std::int64_t count, Body &&body)
        {
            std::exception_ptr first;
            #pragma omp parallel for schedule(dynamic, 4)
            for (std::int64_t i = 0; i < count; ++i) {
                try {
                    body(static_cast<std::uint64_t>(i));
                } catch (...) {
                    #pragma omp critical(audita_kernel_error)
                    if (!first)
                        first = std::current_exception();
                }
            }
            if (first)
                std::rethrow_exception(first);
        }

        std::uint64_t sector_count(const protocol::file_layout &layout, byte_view padded)
        {
            if (padded.size() != layout.chunk_count * layout.chunk_size)
                throw parameter_error("padded file size does not match its layout");
            return layout.chunk_count * layout.sectors_per_chunk;
        }

        byte_view sector_bytes(const protocol::file_layout &l, byte_view padded, std::uint64_t g)
        {
            const auto chunk = g / l.sectors_per_chunk;
            const auto s = g % l.sectors_per_chunk;
            const auto begin = s * l.sector_bytes;
            const auto len = std::min(l.sector_bytes, l.chunk_size - begin);
            return padded.subspan(chunk * l.chunk_size + begin, len);
        }

        std::vector<std::uint64_t> missing_positions(std::uint64_t m, std::uint64_t t, byte_view seed)
        {
            if (t == 0)
                return {};
            const auto s = crypto::hash(hash_domain::simulation, { as_bytes("missing"), seed });
            return crypto::sample_without_replacement(hash_domain::simulation, s.bytes, m, t);
        }

        bool trial_fails(std::uint64_t m, std::uint64_t d, const std::vector<bool> &missing, byte_view seed,
            std::uint64_t j)
        {
            byte_writer w;
            w.raw(as_bytes("trial"));
            w.raw(seed);
            w.u64(j);
            const auto s = crypto::hash(hash_domain::simulation, w.bytes());
            crypto::index_sampler sampler { hash_domain::challenge_index, s.bytes, m };
            for (std::uint64_t i = 0; i < d; ++i)
                if (missing[sampler.next()])
                    return true;
            return false;
        }

        void check_detection_args(std::uint64_t m, std::uint64_t t, std::uint64_t d)
        {
            if (m == 0 || t > m || d > m)
                throw parameter_error("need t <= m, d <= m and m >= 1");
        }

        std::vector<bool> missing_bitmap(std::uint64_t m, std::uint64_t t, byte_view seed)
        {
            std::vector<bool> bits(m, false);
            for (const auto p: missing_positions(m, t, seed))
                bits[p] = true;
            return bits;
        }

        prove_result run_prove(const prove_job &job, const chain::identification_string &idstr, std::uint64_t d)
        {
            prove_result r;
            try {
                r.proof = protocol::prove(*job.file, *job.keys, idstr, *job.assignment, d);
            } catch (const error &e) {
                r.failure = e.kind();
            }
            return r;
        }
    }

    std::vector<mpz_class> tag_sectors_serial(const pdp::keypair &keys, const protocol::file_layout &layout,
        byte_view padded_file)
    {
        const auto count = sector_count(layout, padded_file);
        std::vector<mpz_class> out(count);
        for (std::uint64_t g = 0; g < count; ++g)
            out[g] = pdp::tag(keys, g, sector_bytes(layout, padded_file, g)).value;
        return out;
    }

    std::vector<mpz_class> tag_sectors_parallel(const pdp::keypair &keys, const protocol::file_layout &layout,
        byte_view padded_file)
    {
        const auto count = sector_count(layout, padded_file);
        std::vector<mpz_class> out(count);
        parallel_for(static_cast<std::int64_t>(count), [&](std::uint64_t g) {
            out[g] = pdp::tag(keys, g, sector_bytes(layout, padded_file, g)).value;
        });
        return out;
    }

    std::vector<std::vector<std::uint64_t>> assignment_batch_serial(std::span<const crypto::sig_public_key> nodes,
        std::uint64_t n, std::uint64_t m)
    {
        std::vector<std::vector<std::uint64_t>> out;
        out.reserve(nodes.size());
        for (const auto &node: nodes)
            out.push_back(protocol::assignment_indexes(node, n, m));
        return out;
    }

    std::vector<std::vector<std::uint64_t>> assignment_batch_parallel(std::span<const crypto::sig_public_key> nodes,
        std::uint64_t n, std::uint64_t m)
    {
        std::vector<std::vector<std::uint64_t>> out(nodes.size());
        parallel_for(static_cast<std::int64_t>(nodes.size()), [&](std::uint64_t i) {
            out[i] = protocol::assignment_indexes(nodes[i], n, m);
        });
        return out;
    }

    detection_tally detection_trials_serial(std::uint64_t m, std::uint64_t t, std::uint64_t d, std::uint64_t trials,
        byte_view seed)
    {
        check_detection_args(m, t, d);
        const auto missing = missing_bitmap(m, t, seed);
        detection_tally out { trials, 0 };
        for (std::uint64_t j = 0; j < trials; ++j)
            out.failures += trial_fails(m, d, missing, seed, j) ? 1 : 0;
        return out;
    }

    detection_tally detection_trials_parallel(std::uint64_t m, std::uint64_t t, std::uint64_t d,
        std::uint64_t trials, byte_view seed)
    {
        check_detection_args(m, t, d);
        const auto missing = missing_bitmap(m, t, seed);
        std::uint64_t failures = 0;
        const auto count = static_cast<std::int64_t>(trials);
        #pragma omp parallel for schedule(static) reduction(+ : failures)
        for (std::int64_t j = 0; j < count; ++j)
            failures += trial_fails(m, d, missing, seed, static_cast<std::uint64_t>(j)) ? 1 : 0;
        return { trials, failures };
    }

    std::vector<prove_result> prove_batch_serial(std::span<const prove_job> jobs,
        const chain::identification_string &idstr, std::uint64_t d)
    {
        std::vector<prove_result> out;
        out.reserve(jobs.size());
        for (const auto &job: jobs)
            out.push_back(run_prove(job, idstr, d));
        return out;
    }

    std::vector<prove_result> prove_batch_parallel(std::span<const prove_job> jobs,
        const chain::identification_string &idstr, std::uint64_t d)
    {
        std::vector<prove_result> out(jobs.size());
        parallel_for(static_cast<std::int64_t>(jobs.size()), [&](std::uint64_t i) {
            out[i] = run_prove(jobs[i], idstr, d);
        });
        return out;
    }

    std::vector<char> verify_batch_serial(std::span<const verify_job> jobs, const chain::identification_string &idstr,
        std::uint64_t d)
    {
        std::vector<char> out;
        out.reserve(jobs.size());
        for (const auto &job: jobs)
            out.push_back(protocol::verify_possession(*job.file, idstr, *job.proof, d, job.assignment) ? 1 : 0);
        return out;
    }

    std::vector<char> verify_batch_parallel(std::span<const verify_job> jobs,
        const chain::identification_string &idstr, std::uint64_t d)
    {
        std::vector<char> out(jobs.size(), 0);
        parallel_for(static_cast<std::int64_t>(jobs.size()), [&](std::uint64_t i) {
            out[i] = protocol::verify_possession(*jobs[i].file, idstr, *jobs[i].proof, d, jobs[i].assignment) ? 1 : 0;
        });
        return out;
    }

}
