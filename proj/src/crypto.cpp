#include <bit>
#include <cstring>
#include <memory>
#include <openssl/evp.h>
#include <audita/crypto.hpp>
#include <audita/error.hpp>

namespace audita::crypto {

    namespace {
        const EVP_MD *sha3_md()
        {
            static const EVP_MD *md = EVP_MD_fetch(nullptr, "SHA3-256", nullptr);
            if (!md) [[unlikely]]
                throw internal_error("OpenSSL does not provide SHA3-256");
            return md;
        }

        struct md_ctx_deleter {
            void operator()(EVP_MD_CTX *c) const noexcept { EVP_MD_CTX_free(c); }
        };

        struct pkey_deleter {
            void operator()(EVP_PKEY *k) const noexcept { EVP_PKEY_free(k); }
        };

        using md_ctx_ptr = std::unique_ptr<EVP_MD_CTX, md_ctx_deleter>;
        using pkey_ptr = std::unique_ptr<EVP_PKEY, pkey_deleter>;

        EVP_MD_CTX *thread_ctx()
        {
            thread_local md_ctx_ptr ctx { EVP_MD_CTX_new() };
            return ctx.get();
        }

        class sha3_stream {
        public:
            sha3_stream(): _ctx { thread_ctx() }
            {
                if (EVP_DigestInit_ex2(_ctx, sha3_md(), nullptr) != 1) [[unlikely]]
                    throw internal_error("SHA3 init failed");
            }

            void update(byte_view b)
            {
                if (!b.empty() && EVP_DigestUpdate(_ctx, b.data(), b.size()) != 1) [[unlikely]]
                    throw internal_error("SHA3 update failed");
            }

            digest finish()
            {
                digest out;
                unsigned int len = 0;
                if (EVP_DigestFinal_ex(_ctx, out.bytes.data(), &len) != 1 || len != digest_size) [[unlikely]]
                    throw internal_error("SHA3 final failed");
                return out;
            }
        private:
            EVP_MD_CTX *_ctx;
        };

        byte_string domain_prefix(hash_domain d)
        {
            const auto label = domain_label(d);
            byte_string out;
            out.reserve(label.size() + 1);
            out.push_back(static_cast<std::uint8_t>(label.size()));
            out.insert(out.end(), label.begin(), label.end());
            return out;
        }
    }

    std::string digest::hex() const
    {
        return to_hex(bytes);
    }

    digest digest::from_bytes(byte_view b)
    {
        if (b.size() != digest_size)
            throw decode_error("digest must be " + std::to_string(digest_size) + " bytes, got " + std::to_string(b.size()));
        digest d;
        std::memcpy(d.bytes.data(), b.data(), digest_size);
        return d;
    }

    std::string_view domain_label(hash_domain d)
    {
        switch (d) {
            case hash_domain::chunk_sampling: return "audita/H1/chunks";
            case hash_domain::node_sampling: return "audita/H2/nodes";
            case hash_domain::challenge_seed: return "audita/H3/challenge";
            case hash_domain::challenge_index: return "audita/chal/index";
            case hash_domain::challenge_coefficient: return "audita/chal/coef";
            case hash_domain::full_domain: return "audita/pdp/fdh";
            case hash_domain::key_derivation: return "audita/keys";
            case hash_domain::oracle: return "audita/oracle";
            case hash_domain::leader_selection: return "audita/leader";
            case hash_domain::block: return "audita/block";
            case hash_domain::transaction: return "audita/tx";
            case hash_domain::file_id: return "audita/file";
            case hash_domain::simulation: return "audita/sim";
        }
        throw parameter_error("unknown hash domain");
    }

    digest sha3_256(byte_view input)
    {
        sha3_stream s;
        s.update(input);
        return s.finish();
    }

    digest hash(hash_domain domain, byte_view input)
    {
        return hash(domain, { input });
    }

    digest hash(hash_domain domain, std::initializer_list<byte_view> parts)
    {
        const auto label = domain_label(domain);
        const std::uint8_t len = static_cast<std::uint8_t>(label.size());
        sha3_stream s;
        s.update(byte_view { &len, 1 });
        s.update(as_bytes(label));
        for (const auto &p: parts)
            s.update(p);
        return s.finish();
    }

    void expand(hash_domain domain, byte_view seed, std::span<std::uint8_t> out)
    {
        std::uint32_t block = 0;
        std::size_t pos = 0;
        while (pos < out.size()) {
            byte_writer ctr;
            ctr.u32(block++);
            const auto d = hash(domain, { seed, ctr.bytes() });
            const auto n = std::min(digest_size, out.size() - pos);
            std::memcpy(out.data() + pos, d.bytes.data(), n);
            pos += n;
        }
    }

    void index_sampler::ctx_deleter::operator()(evp_md_ctx_st *c) const noexcept
    {
        EVP_MD_CTX_free(c);
    }

    index_sampler::index_sampler(hash_domain domain, byte_view seed, std::uint64_t universe):
        _prefix { EVP_MD_CTX_new() },
        _universe { universe }
    {
        if (universe == 0)
            throw parameter_error("sampling universe must be non-empty");
        if (!_prefix)
            throw internal_error("cannot allocate a hash context");
        const auto prefix = domain_prefix(domain);
        if (EVP_DigestInit_ex2(_prefix.get(), sha3_md(), nullptr) != 1
            || EVP_DigestUpdate(_prefix.get(), prefix.data(), prefix.size()) != 1
            || (!seed.empty() && EVP_DigestUpdate(_prefix.get(), seed.data(), seed.size()) != 1)) [[unlikely]]
            throw internal_error("SHA3 init failed");
        const unsigned bits = universe == 1 ? 0 : std::bit_width(universe - 1);
        _mask = bits == 64 ? ~std::uint64_t { 0 } : ((std::uint64_t { 1 } << bits) - 1);
        // Dense bitmap up to 2^24 entries (2 MiB); hash set beyond.
        if (universe <= (std::uint64_t { 1 } << 24))
            _seen_dense.resize(universe);
    }

    bool index_sampler::_mark(std::uint64_t idx)
    {
        if (!_seen_dense.empty()) {
            if (_seen_dense[idx])
                return false;
            _seen_dense[idx] = true;
            return true;
        }
        return _seen_sparse.insert(idx).second;
    }

    std::uint64_t index_sampler::next()
    {
        if (_drawn >= _universe)
            throw parameter_error("sampler exhausted: all " + std::to_string(_universe) + " indexes drawn");
        for (;;) {
            ++_counter;
            std::uint8_t ctr[8];
            for (int i = 0; i < 8; ++i)
                ctr[i] = static_cast<std::uint8_t>(_counter >> (56 - 8 * i));
            auto *ctx = thread_ctx();
            digest d;
            unsigned int len = 0;
            if (EVP_MD_CTX_copy_ex(ctx, _prefix.get()) != 1 || EVP_DigestUpdate(ctx, ctr, sizeof(ctr)) != 1
                || EVP_DigestFinal_ex(ctx, d.bytes.data(), &len) != 1) [[unlikely]]
                throw internal_error("SHA3 failed");
            std::uint64_t tail = 0;
            for (std::size_t i = digest_size - 8; i < digest_size; ++i)
                tail = (tail << 8) | d.bytes[i];
            const auto candidate = tail & _mask;
            if (candidate >= _universe)
                continue;
            if (!_mark(candidate))
                continue;
            ++_drawn;
            return candidate;
        }
    }

    std::vector<std::uint64_t> sample_without_replacement(hash_domain domain, byte_view seed,
        std::uint64_t universe_size, std::uint64_t sample_size)
    {
        if (universe_size == 0)
            throw parameter_error("universe_size must be at least 1");
        if (sample_size > universe_size)
            throw parameter_error("cannot sample " + std::to_string(sample_size) + " distinct indexes from "
                + std::to_string(universe_size));
        std::vector<std::uint64_t> out;
        out.reserve(sample_size);
        index_sampler s { domain, seed, universe_size };
        while (out.size() < sample_size)
            out.push_back(s.next());
        return out;
    }

    std::string sig_public_key::hex() const
    {
        return to_hex(bytes);
    }

    sig_public_key sig_public_key::decode(byte_view b)
    {
        if (b.size() != sig_key_size)
            throw decode_error("public key must be " + std::to_string(sig_key_size) + " bytes, got " + std::to_string(b.size()));
        sig_public_key k;
        std::memcpy(k.bytes.data(), b.data(), sig_key_size);
        return k;
    }

    sig_secret_key sig_secret_key::decode(byte_view b)
    {
        if (b.size() != sig_key_size)
            throw decode_error("secret key must be " + std::to_string(sig_key_size) + " bytes, got " + std::to_string(b.size()));
        sig_secret_key k;
        std::memcpy(k.bytes.data(), b.data(), sig_key_size);
        return k;
    }

    byte_string sig_keypair::serialize() const
    {
        byte_writer w;
        w.field(public_key.bytes);
        w.field(secret_key.bytes);
        return std::move(w).bytes();
    }

    sig_keypair sig_keypair::deserialize(byte_view b)
    {
        byte_reader r { b };
        sig_keypair kp;
        kp.public_key = sig_public_key::decode(r.field());
        kp.secret_key = sig_secret_key::decode(r.field());
        r.expect_end();
        return kp;
    }

    namespace {
        pkey_ptr private_pkey(const sig_secret_key &sk)
        {
            pkey_ptr k { EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, sk.bytes.data(), sk.bytes.size()) };
            if (!k) [[unlikely]]
                throw internal_error("Ed25519 private key construction failed");
            return k;
        }
    }

    sig_keypair sig_keygen(byte_view seed)
    {
        const auto sk_digest = hash(hash_domain::key_derivation, { as_bytes("ed25519"), seed });
        sig_keypair kp;
        kp.secret_key.bytes = sk_digest.bytes;
        const auto k = private_pkey(kp.secret_key);
        std::size_t len = sig_key_size;
        if (EVP_PKEY_get_raw_public_key(k.get(), kp.public_key.bytes.data(), &len) != 1 || len != sig_key_size) [[unlikely]]
            throw internal_error("Ed25519 public key derivation failed");
        return kp;
    }

    signature sign(const sig_secret_key &sk, byte_view message)
    {
        const auto k = private_pkey(sk);
        md_ctx_ptr ctx { EVP_MD_CTX_new() };
        if (!ctx || EVP_DigestSignInit(ctx.get(), nullptr, nullptr, nullptr, k.get()) != 1) [[unlikely]]
            throw internal_error("Ed25519 sign init failed");
        signature sig {};
        std::size_t len = sig.size();
        if (EVP_DigestSign(ctx.get(), sig.data(), &len, message.data(), message.size()) != 1 || len != sig.size()) [[unlikely]]
            throw internal_error("Ed25519 signing failed");
        return sig;
    }

    bool sig_verify(const sig_public_key &pk, byte_view message, byte_view sig)
    {
        if (sig.size() != signature_size)
            throw decode_error("signature must be " + std::to_string(signature_size) + " bytes, got " + std::to_string(sig.size()));
        pkey_ptr k { EVP_PKEY_new_raw_public_key(EVP_PKEY_ED25519, nullptr, pk.bytes.data(), pk.bytes.size()) };
        if (!k)
            return false;
        md_ctx_ptr ctx { EVP_MD_CTX_new() };
        if (!ctx || EVP_DigestVerifyInit(ctx.get(), nullptr, nullptr, nullptr, k.get()) != 1)
            return false;
        return EVP_DigestVerify(ctx.get(), sig.data(), sig.size(), message.data(), message.size()) == 1;
    }

}
