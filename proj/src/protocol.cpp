#include <algorithm>
#include <unordered_map>
#include <audita/error.hpp>
#include <audita/kernels.hpp>
#include <audita/protocol.hpp>

namespace audita::protocol {

    using crypto::hash_domain;

    file_layout make_layout(std::uint64_t byte_length, std::uint64_t chunk_size, const pdp::public_key &pk)
    {
        if (byte_length == 0)
            throw parameter_error("file is empty");
        if (chunk_size == 0)
            throw parameter_error("chunk size must be positive");
        file_layout l;
        l.byte_length = byte_length;
        l.chunk_size = chunk_size;
        l.sector_bytes = std::min<std::uint64_t>(chunk_size, pk.block_bytes());
        l.sectors_per_chunk = (chunk_size + l.sector_bytes - 1) / l.sector_bytes;
        l.chunk_count = (byte_length + chunk_size - 1) / chunk_size;
        return l;
    }

    byte_string file_public_key::serialize() const
    {
        byte_writer w;
        w.field(pdp.serialize());
        w.u64(layout.byte_length);
        w.u64(layout.chunk_size);
        w.u64(layout.sector_bytes);
        w.u64(layout.sectors_per_chunk);
        w.u64(layout.chunk_count);
        return std::move(w).bytes();
    }

    file_public_key file_public_key::deserialize(byte_view b)
    {
        byte_reader r { b };
        file_public_key fpk;
        fpk.pdp = pdp::public_key::deserialize(r.field());
        fpk.layout.byte_length = r.u64();
        fpk.layout.chunk_size = r.u64();
        fpk.layout.sector_bytes = r.u64();
        fpk.layout.sectors_per_chunk = r.u64();
        fpk.layout.chunk_count = r.u64();
        r.expect_end();
        try {
            if (make_layout(fpk.layout.byte_length, fpk.layout.chunk_size, fpk.pdp) != fpk.layout)
                throw decode_error("file layout is inconsistent with its key");
        } catch (const parameter_error &e) {
            throw decode_error(std::string { "bad file layout: " } + e.what());
        }
        return fpk;
    }

    byte_view encoded_chunk::sector(const file_layout &layout, std::uint64_t s) const
    {
        const auto begin = s * layout.sector_bytes;
        const auto len = std::min(layout.sector_bytes, layout.chunk_size - begin);
        return byte_view { data }.subspan(begin, len);
    }

    byte_string encoded_file::recover_bytes() const
    {
        byte_string out;
        out.reserve(pk.layout.chunk_count * pk.layout.chunk_size);
        for (const auto &c: chunks)
            out.insert(out.end(), c.data.begin(), c.data.end());
        out.resize(pk.layout.byte_length);
        return out;
    }

    sig_keypair bc_keygen(byte_view seed)
    {
        byte_writer w;
        w.raw(as_bytes("block-creator"));
        w.raw(seed);
        return crypto::sig_keygen(w.bytes());
    }

    sig_keypair sn_keygen(byte_view seed)
    {
        byte_writer w;
        w.raw(as_bytes("storage-node"));
        w.raw(seed);
        return crypto::sig_keygen(w.bytes());
    }

    encoded_file setup(byte_view file, std::uint64_t chunk_size, const pdp::keypair &keys)
    {
        encoded_file out;
        out.pk.pdp = keys.pub;
        out.pk.layout = make_layout(file.size(), chunk_size, keys.pub);
        const auto &l = out.pk.layout;
        byte_string padded(file.begin(), file.end());
        padded.resize(l.chunk_count * l.chunk_size, 0);
        auto tags = kernels::tag_sectors_parallel(keys, l, padded);
        if (tags.size() != l.chunk_count * l.sectors_per_chunk)
            throw internal_error("tagging produced the wrong number of tags");
        out.chunks.resize(l.chunk_count);
        for (std::uint64_t c = 0; c < l.chunk_count; ++c) {
            auto &ch = out.chunks[c];
            ch.data.assign(padded.begin() + c * l.chunk_size, padded.begin() + (c + 1) * l.chunk_size);
            ch.sector_tags.reserve(l.sectors_per_chunk);
            for (std::uint64_t s = 0; s < l.sectors_per_chunk; ++s)
                ch.sector_tags.push_back(std::move(tags[c * l.sectors_per_chunk + s]));
        }
        return out;
    }

    encoded_file setup(byte_view file, std::uint64_t chunk_size, std::size_t modulus_bits, byte_view seed)
    {
        if (file.empty())
            throw parameter_error("file is empty");
        return setup(file, chunk_size, pdp::keygen(modulus_bits, seed));
    }

    std::vector<std::uint64_t> assignment_indexes(const sig_public_key &node, std::uint64_t n, std::uint64_t m)
    {
        if (m > n)
            throw parameter_error("m=" + std::to_string(m) + " exceeds the file's n=" + std::to_string(n) + " chunks");
        if (m == 0)
            return {};
        return crypto::sample_without_replacement(hash_domain::chunk_sampling, node.bytes, n, m);
    }

    chunk_assignment get_chunks(const file_public_key &fpk, const encoded_file &file, const sig_public_key &node,
        std::uint64_t m)
    {
        chunk_assignment a;
        a.node = node;
        a.indexes = assignment_indexes(node, fpk.n(), m);
        if (file.chunks.size() != fpk.n())
            throw parameter_error("encoded file does not match its public key");
        for (const auto i: a.indexes)
            a.held.emplace(i, file.chunks[i]);
        return a;
    }

    sig_public_key select_leader(std::span<const sig_public_key> block_creators, const digest &epoch_seed)
    {
        if (block_creators.empty())
            throw parameter_error("no block creators registered");
        const auto pick = crypto::sample_without_replacement(hash_domain::leader_selection, epoch_seed.bytes,
            block_creators.size(), 1);
        return block_creators[pick.front()];
    }

    std::vector<sig_public_key> elected_set(std::span<const sig_public_key> registry,
        const identification_string &idstr, std::uint64_t k)
    {
        if (registry.empty())
            throw parameter_error("storage-node registry is empty");
        if (k > registry.size())
            throw parameter_error("k=" + std::to_string(k) + " exceeds the registry of " + std::to_string(registry.size()));
        const auto positions = crypto::sample_without_replacement(hash_domain::node_sampling, idstr.serialize(),
            registry.size(), k);
        std::vector<sig_public_key> out;
        out.reserve(k);
        for (const auto p: positions)
            out.push_back(registry[p]);
        return out;
    }

    election elect(std::span<const sig_public_key> registry, const sig_public_key &leader, const digest &epoch_seed,
        std::uint64_t timestamp, std::uint64_t k)
    {
        election e;
        e.idstr = { leader, epoch_seed, timestamp };
        e.elected = elected_set(registry, e.idstr, k);
        return e;
    }

    byte_string challenge_seed(const file_public_key &fpk, const sig_public_key &node,
        const identification_string &idstr)
    {
        const auto dg = crypto::hash(hash_domain::challenge_seed, { fpk.serialize(), node.bytes, idstr.serialize() });
        return { dg.bytes.begin(), dg.bytes.end() };
    }

    pdp::challenge derive_challenge(const file_public_key &fpk, const sig_public_key &node,
        const identification_string &idstr, std::uint64_t d, std::span<const std::uint64_t> assignment)
    {
        if (d > assignment.size())
            throw parameter_error("d=" + std::to_string(d) + " exceeds m=" + std::to_string(assignment.size()));
        return pdp::genchal(d, assignment, challenge_seed(fpk, node, idstr));
    }

    pdp::challenge sector_challenge(const pdp::challenge &chunk_challenge, const file_layout &layout,
        std::uint64_t sector)
    {
        pdp::challenge c = chunk_challenge;
        for (auto &i: c.indexes)
            i = i * layout.sectors_per_chunk + sector;
        return c;
    }

    byte_string possession_proof::body(const file_public_key &fpk) const
    {
        byte_writer w;
        w.field(file_id.bytes);
        w.field(prover.bytes);
        w.u32(static_cast<std::uint32_t>(sectors.size()));
        for (const auto &p: sectors)
            w.field(p.serialize(fpk.pdp));
        return std::move(w).bytes();
    }

    byte_string possession_proof::serialize(const file_public_key &fpk) const
    {
        byte_writer w;
        w.raw(body(fpk));
        w.raw(sig);
        return std::move(w).bytes();
    }

    possession_proof possession_proof::deserialize(byte_view b)
    {
        byte_reader r { b };
        possession_proof p;
        p.file_id = digest::from_bytes(r.field());
        p.prover = sig_public_key::decode(r.field());
        const auto count = r.u32();
        if (count > r.remaining())
            throw decode_error("sector count exceeds the encoded size");
        p.sectors.reserve(count);
        for (std::uint32_t s = 0; s < count; ++s)
            p.sectors.push_back(pdp::proof::deserialize(r.field()));
        const auto sig = r.raw(crypto::signature_size);
        std::copy(sig.begin(), sig.end(), p.sig.begin());
        r.expect_end();
        return p;
    }

    possession_proof prove(const file_public_key &fpk, const sig_keypair &node_keys,
        const identification_string &idstr, const chunk_assignment &assignment, std::uint64_t d)
    {
        const auto &l = fpk.layout;
        const auto chal = derive_challenge(fpk, node_keys.public_key, idstr, d, assignment.indexes);
        possession_proof out;
        out.prover = node_keys.public_key;
        out.file_id = fpk.file_id();
        out.sectors.reserve(l.sectors_per_chunk);
        const auto lookup = [&](std::uint64_t block_index) -> std::optional<pdp::block_ref> {
            const auto chunk = block_index / l.sectors_per_chunk;
            const auto s = block_index % l.sectors_per_chunk;
            const auto it = assignment.held.find(chunk);
            if (it == assignment.held.end() || it->second.sector_tags.size() != l.sectors_per_chunk)
                return std::nullopt;
            return pdp::block_ref { it->second.sector(l, s), &it->second.sector_tags[s] };
        };
        try {
            for (std::uint64_t s = 0; s < l.sectors_per_chunk; ++s)
                out.sectors.push_back(pdp::genproof(fpk.pdp, sector_challenge(chal, l, s), lookup));
        } catch (const incomplete_input_error &e) {
            throw data_loss_error(e.what());
        }
        out.sig = crypto::sign(node_keys.secret_key, out.body(fpk));
        return out;
    }

    namespace {
        rejection check_possession(const file_public_key &fpk, const identification_string &idstr,
            const possession_proof &proof, std::uint64_t d, std::span<const std::uint64_t> assignment)
        {
            const auto &l = fpk.layout;
            if (proof.file_id != fpk.file_id())
                return rejection::unknown_file;
            if (proof.sectors.size() != l.sectors_per_chunk)
                return rejection::bad_proof;
            try {
                if (!crypto::sig_verify(proof.prover, proof.body(fpk), proof.sig))
                    return rejection::bad_signature;
                if (d > assignment.size())
                    return rejection::bad_proof;
                const auto chal = derive_challenge(fpk, proof.prover, idstr, d, assignment);
                for (std::uint64_t s = 0; s < l.sectors_per_chunk; ++s)
                    if (!pdp::checkproof(fpk.pdp, sector_challenge(chal, l, s), proof.sectors[s]))
                        return rejection::bad_proof;
            } catch (const error &) {
                // Out-of-range integers fail fixed-width re-encoding.
                return rejection::bad_proof;
            }
            return rejection::none;
        }

        rejection check_possession(const file_public_key &fpk, const identification_string &idstr,
            const possession_proof &proof, std::uint64_t d, std::uint64_t m)
        {
            if (m > fpk.n())
                return rejection::bad_proof;
            const auto assignment = assignment_indexes(proof.prover, fpk.n(), m);
            return check_possession(fpk, idstr, proof, d, assignment);
        }
    }

    bool verify_possession(const file_public_key &fpk, const identification_string &idstr,
        const possession_proof &proof, std::uint64_t d, std::uint64_t m)
    {
        return check_possession(fpk, idstr, proof, d, m) == rejection::none;
    }

    bool verify_possession(const file_public_key &fpk, const identification_string &idstr,
        const possession_proof &proof, std::uint64_t d, std::span<const std::uint64_t> assignment)
    {
        return check_possession(fpk, idstr, proof, d, assignment) == rejection::none;
    }

    std::vector<possession_proof> prove_multi(std::span<const file_public_key> files,
        std::span<const chunk_assignment> assignments, const sig_keypair &node_keys,
        const identification_string &idstr, std::uint64_t d)
    {
        if (files.size() != assignments.size())
            throw parameter_error("need one assignment per file");
        std::vector<possession_proof> out;
        out.reserve(files.size());
        for (std::size_t f = 0; f < files.size(); ++f)
            out.push_back(prove(files[f], node_keys, idstr, assignments[f], d));
        return out;
    }

    std::uint64_t audit_params::effective_k(std::uint64_t registry_size) const noexcept
    {
        return std::min(k, registry_size);
    }

    std::uint64_t audit_params::effective_l(std::uint64_t registry_size) const noexcept
    {
        return std::min(l, effective_k(registry_size));
    }

    void audit_params::validate() const
    {
        if (d > m)
            throw parameter_error("need d <= m, got d=" + std::to_string(d) + " m=" + std::to_string(m));
        if (l == 0 || k == 0)
            throw parameter_error("k and l must be positive");
        if (l > k)
            throw parameter_error("need l <= k, got l=" + std::to_string(l) + " k=" + std::to_string(k));
    }

    std::string_view rejection_name(rejection r)
    {
        switch (r) {
            case rejection::none: return "none";
            case rejection::bad_idstr: return "bad-idstr";
            case rejection::bad_leader: return "bad-leader";
            case rejection::bad_block: return "bad-block";
            case rejection::wrong_proof_count: return "wrong-proof-count";
            case rejection::prover_not_elected: return "prover-not-elected";
            case rejection::duplicate_prover: return "duplicate-prover";
            case rejection::unknown_file: return "unknown-file";
            case rejection::bad_signature: return "bad-signature";
            case rejection::bad_proof: return "bad-proof";
        }
        return "unknown";
    }

    rejection check_extension_structure(const extension_context &ctx, const identification_string &idstr,
        const chain::block &blk, std::span<const proof_claim> claims, const audit_params &params)
    {
        if (idstr.timestamp != ctx.expected_epoch || idstr.epoch_seed != ctx.expected_seed)
            return rejection::bad_idstr;
        if (ctx.block_creators.empty() || idstr.leader != select_leader(ctx.block_creators, ctx.expected_seed))
            return rejection::bad_leader;
        if (blk.leader != idstr.leader)
            return rejection::bad_leader;
        if (blk.height != ctx.expected_height || blk.previous != ctx.previous || blk.epoch != idstr.timestamp
            || blk.idstr_digest != idstr.id())
            return rejection::bad_block;
        if (!blk.signature_valid())
            return rejection::bad_block;

        const auto c = ctx.files.size();
        if (ctx.registry.empty() || c == 0)
            return claims.empty() ? rejection::none : rejection::wrong_proof_count;
        const auto k_eff = params.effective_k(ctx.registry.size());
        const auto l_eff = params.effective_l(ctx.registry.size());
        const auto elected = elected_set(ctx.registry, idstr, k_eff);

        std::unordered_map<sig_public_key, std::vector<digest>> per_prover;
        for (const auto &cl: claims) {
            if (std::find(elected.begin(), elected.end(), cl.prover) == elected.end())
                return rejection::prover_not_elected;
            const bool known = std::any_of(ctx.files.begin(), ctx.files.end(),
                [&](const file_public_key &f) { return f.file_id() == cl.file_id; });
            if (!known)
                return rejection::unknown_file;
            auto &files = per_prover[cl.prover];
            if (std::find(files.begin(), files.end(), cl.file_id) != files.end())
                return rejection::duplicate_prover;
            files.push_back(cl.file_id);
        }
        if (claims.size() != l_eff * c || per_prover.size() != l_eff)
            return rejection::wrong_proof_count;
        for (const auto &[_, files]: per_prover)
            if (files.size() != c)
                return rejection::wrong_proof_count;
        return rejection::none;
    }

    rejection check_extension(const extension_context &ctx, const identification_string &idstr,
        const chain::block &blk, std::span<const possession_proof> proofs, const audit_params &params)
    {
        std::vector<proof_claim> claims;
        claims.reserve(proofs.size());
        for (const auto &p: proofs)
            claims.push_back({ p.prover, p.file_id });
        if (const auto r = check_extension_structure(ctx, idstr, blk, claims, params); r != rejection::none)
            return r;
        for (const auto &p: proofs) {
            const auto f = std::find_if(ctx.files.begin(), ctx.files.end(),
                [&](const file_public_key &fpk) { return fpk.file_id() == p.file_id; });
            if (const auto r = check_possession(*f, idstr, p, params.d, params.m); r != rejection::none)
                return r;
        }
        return rejection::none;
    }

    bool verify_extension(const extension_context &ctx, const identification_string &idstr, const chain::block &blk,
        std::span<const possession_proof> proofs, const audit_params &params)
    {
        try {
            return check_extension(ctx, idstr, blk, proofs, params) == rejection::none;
        } catch (const error &) {
            return false;
        }
    }

    bool verify_multi(const extension_context &ctx, const identification_string &idstr, const chain::block &blk,
        std::span<const possession_proof> proofs, const audit_params &params)
    {
        return verify_extension(ctx, idstr, blk, proofs, params);
    }

}
