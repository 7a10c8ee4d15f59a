#include <filesystem>
#include <fstream>
#include <sstream>
#include <CLI11.hpp>
#include <audita/bigint.hpp>
#include <audita/error.hpp>
#include <audita/ledger.hpp>
#include <audita/netsim.hpp>
#include <audita/protocol.hpp>
#include "cli.hpp"

namespace audita::cli {

    namespace fs = std::filesystem;

    namespace {
        byte_string read_file(const std::string &path)
        {
            std::ifstream in { path, std::ios::binary };
            if (!in)
                throw io_error("cannot read " + path);
            return { std::istreambuf_iterator<char> { in }, std::istreambuf_iterator<char> {} };
        }

        std::string read_text(const std::string &path)
        {
            const auto b = read_file(path);
            return { b.begin(), b.end() };
        }

        byte_string read_hex_file(const std::string &path)
        {
            auto text = read_text(path);
            while (!text.empty() && (text.back() == '\n' || text.back() == '\r' || text.back() == ' '))
                text.pop_back();
            return from_hex(text);
        }

        void write_file(const fs::path &path, byte_view data)
        {
            if (path.has_parent_path())
                fs::create_directories(path.parent_path());
            std::ofstream out { path, std::ios::binary | std::ios::trunc };
            if (!out)
                throw io_error("cannot write " + path.string());
            out.write(reinterpret_cast<const char *>(data.data()), static_cast<std::streamsize>(data.size()));
            if (!out)
                throw io_error("short write to " + path.string());
        }

        void write_text(const fs::path &path, std::string_view text)
        {
            write_file(path, as_bytes(text));
        }

        void write_chunks(byte_writer &w, const std::map<std::uint64_t, protocol::encoded_chunk> &chunks)
        {
            w.u64(chunks.size());
            for (const auto &[i, c]: chunks) {
                w.u64(i);
                w.field(c.data);
                w.u32(static_cast<std::uint32_t>(c.sector_tags.size()));
                for (const auto &t: c.sector_tags)
                    w.field(bigint::to_bytes(t));
            }
        }

        std::map<std::uint64_t, protocol::encoded_chunk> read_chunks(byte_reader &r)
        {
            std::map<std::uint64_t, protocol::encoded_chunk> out;
            const auto count = r.u64();
            for (std::uint64_t k = 0; k < count; ++k) {
                const auto i = r.u64();
                protocol::encoded_chunk c;
                const auto data = r.field();
                c.data.assign(data.begin(), data.end());
                const auto s = r.u32();
                for (std::uint32_t j = 0; j < s; ++j)
                    c.sector_tags.push_back(bigint::from_bytes(r.field()));
                out.emplace(i, std::move(c));
            }
            return out;
        }

        // store.bin: file public key followed by every tagged chunk.
        byte_string encode_store(const protocol::encoded_file &f)
        {
            std::map<std::uint64_t, protocol::encoded_chunk> all;
            for (std::uint64_t i = 0; i < f.chunks.size(); ++i)
                all.emplace(i, f.chunks[i]);
            byte_writer w;
            w.field(f.pk.serialize());
            write_chunks(w, all);
            return std::move(w).bytes();
        }

        protocol::encoded_file decode_store(byte_view b)
        {
            byte_reader r { b };
            protocol::encoded_file f;
            f.pk = protocol::file_public_key::deserialize(r.field());
            auto chunks = read_chunks(r);
            r.expect_end();
            if (chunks.size() != f.pk.n())
                throw decode_error("store holds the wrong number of chunks");
            for (auto &[i, c]: chunks) {
                if (i != f.chunks.size())
                    throw decode_error("store chunks are not contiguous");
                f.chunks.push_back(std::move(c));
            }
            return f;
        }

        byte_string encode_assignment(const protocol::chunk_assignment &a)
        {
            byte_writer w;
            w.field(a.node.bytes);
            w.u64(a.indexes.size());
            for (const auto i: a.indexes)
                w.u64(i);
            write_chunks(w, a.held);
            return std::move(w).bytes();
        }

        protocol::chunk_assignment decode_assignment(byte_view b)
        {
            byte_reader r { b };
            protocol::chunk_assignment a;
            a.node = crypto::sig_public_key::decode(r.field());
            const auto m = r.u64();
            if (m > r.remaining() / 8)
                throw decode_error("assignment index count exceeds the encoded size");
            for (std::uint64_t j = 0; j < m; ++j)
                a.indexes.push_back(r.u64());
            a.held = read_chunks(r);
            r.expect_end();
            return a;
        }

        byte_string seed_bytes(const std::string &hex)
        {
            const auto s = from_hex(hex);
            if (s.empty())
                throw parameter_error("--seed must be a non-empty hex string");
            return s;
        }

        struct options {
            std::string seed;
            std::string role = "sn";
            std::string out;
            std::string file;
            std::string store;
            std::string scenario;
            std::string key;
            std::string file_pub;
            std::string idstr;
            std::string assignment;
            std::string proof;
            std::string leader;
            std::string verify_chain;
            std::vector<std::string> nodes;
            std::uint64_t chunk_size = protocol::default_chunk_size;
            std::uint64_t modulus_bits = 1024;
            std::uint64_t n = 0;
            std::uint64_t m = 0;
            std::uint64_t k = 0;
            std::uint64_t d = 0;
            std::uint64_t l = 0;
            std::uint64_t timestamp = 1;
            double target = 0.9;
        };

        int cmd_keygen(const options &o, std::ostream &out)
        {
            const auto seed = seed_bytes(o.seed);
            const fs::path dir { o.out };
            if (o.role == "pdp") {
                const auto kp = pdp::keygen(o.modulus_bits, seed);
                byte_writer w;
                w.field(kp.pub.serialize());
                w.field(bigint::to_bytes(kp.sec.p));
                w.field(bigint::to_bytes(kp.sec.q));
                w.field(bigint::to_bytes(kp.sec.private_exponent));
                write_text(dir / "pdp.key", to_hex(w.bytes()) + "\n");
                write_text(dir / "pdp.pub", to_hex(kp.pub.serialize()) + "\n");
                out << "file_id " << kp.pub.file_id.hex() << '\n';
                return exit_ok;
            }
            crypto::sig_keypair kp;
            if (o.role == "sn")
                kp = protocol::sn_keygen(seed);
            else if (o.role == "bc")
                kp = protocol::bc_keygen(seed);
            else
                throw parameter_error("--role must be sn, bc or pdp");
            write_text(dir / (o.role + ".key"), to_hex(kp.serialize()) + "\n");
            write_text(dir / (o.role + ".pub"), kp.public_key.hex() + "\n");
            out << "public_key " << kp.public_key.hex() << '\n';
            return exit_ok;
        }

        int cmd_setup(const options &o, std::ostream &out)
        {
            const auto data = read_file(o.file);
            const auto f = protocol::setup(data, o.chunk_size, o.modulus_bits, seed_bytes(o.seed));
            const fs::path dir { o.out };
            write_file(dir / "store.bin", encode_store(f));
            write_text(dir / "file.pub", to_hex(f.pk.serialize()) + "\n");
            out << "file_id " << f.pk.file_id().hex() << '\n'
                << "chunks " << f.pk.n() << '\n'
                << "sectors_per_chunk " << f.pk.layout.sectors_per_chunk << '\n';
            return exit_ok;
        }

        int cmd_distribute(const options &o, std::ostream &out)
        {
            const auto f = decode_store(read_file(o.store));
            const fs::path dir { o.out };
            for (const auto &path: o.nodes) {
                const auto pk = crypto::sig_public_key::decode(read_hex_file(path));
                const auto a = protocol::get_chunks(f.pk, f, pk, o.m);
                const auto stem = pk.hex().substr(0, 16);
                write_file(dir / (stem + ".assign"), encode_assignment(a));
                std::string manifest = "node " + pk.hex() + "\nm " + std::to_string(o.m) + "\nindexes";
                for (const auto i: a.indexes)
                    manifest += ' ' + std::to_string(i);
                manifest += '\n';
                write_text(dir / (stem + ".manifest"), manifest);
                out << stem << ".assign " << a.indexes.size() << " chunks\n";
            }
            return exit_ok;
        }

        chain::identification_string make_idstr(const options &o)
        {
            const ledger::election_oracle oracle { seed_bytes(o.seed) };
            chain::identification_string id;
            id.epoch_seed = oracle.seed(o.timestamp);
            id.timestamp = o.timestamp;
            if (!o.leader.empty())
                id.leader = crypto::sig_public_key::decode(read_hex_file(o.leader));
            return id;
        }

        int cmd_challenge(const options &o, std::ostream &out)
        {
            const auto fpk = protocol::file_public_key::deserialize(read_hex_file(o.file_pub));
            const auto id = make_idstr(o);
            out << "idstr " << to_hex(id.serialize()) << '\n';
            if (!o.out.empty())
                write_text(o.out, to_hex(id.serialize()) + "\n");
            for (const auto &path: o.nodes) {
                const auto pk = crypto::sig_public_key::decode(read_hex_file(path));
                const auto assigned = protocol::assignment_indexes(pk, fpk.n(), o.m);
                const auto chal = protocol::derive_challenge(fpk, pk, id, o.d, assigned);
                out << "node " << pk.hex() << '\n'
                    << "challenge " << to_hex(pdp::to_wire(chal).serialize()) << '\n'
                    << "indexes";
                for (const auto i: chal.indexes)
                    out << ' ' << i;
                out << '\n';
            }
            return exit_ok;
        }

        int cmd_prove(const options &o, std::ostream &out)
        {
            const auto fpk = protocol::file_public_key::deserialize(read_hex_file(o.file_pub));
            const auto keys = crypto::sig_keypair::deserialize(read_hex_file(o.key));
            const auto a = decode_assignment(read_file(o.assignment));
            if (a.node != keys.public_key)
                throw parameter_error("assignment belongs to a different node");
            const auto id = chain::identification_string::deserialize(read_hex_file(o.idstr));
            const auto p = protocol::prove(fpk, keys, id, a, o.d);
            const auto hex = to_hex(p.serialize(fpk));
            if (o.out.empty())
                out << hex << '\n';
            else
                write_text(o.out, hex + "\n");
            return exit_ok;
        }

        int cmd_verify(const options &o, std::ostream &out)
        {
            const auto fpk = protocol::file_public_key::deserialize(read_hex_file(o.file_pub));
            const auto id = chain::identification_string::deserialize(read_hex_file(o.idstr));
            protocol::possession_proof p;
            try {
                p = protocol::possession_proof::deserialize(read_hex_file(o.proof));
            } catch (const decode_error &e) {
                throw audita::error("verification", std::string { "malformed proof: " } + e.what());
            }
            if (!protocol::verify_possession(fpk, id, p, o.d, o.m))
                throw audita::error("verification", "proof rejected");
            out << "ok " << p.prover.hex() << '\n';
            return exit_ok;
        }

        netsim::sim_config scenario_config(const options &o)
        {
            auto cfg = netsim::load_scenario(o.scenario);
            if (!o.seed.empty())
                cfg.master_seed = seed_bytes(o.seed);
            cfg.validate();
            return cfg;
        }

        int cmd_simulate(const options &o, std::ostream &out)
        {
            const auto cfg = scenario_config(o);
            const auto res = netsim::run_simulation(cfg);
            const fs::path dir { o.out };
            write_text(dir / "coverage.csv", netsim::coverage_csv(res));
            write_text(dir / "nodes.csv", netsim::nodes_csv(res));
            write_text(dir / "chain.txt", res.chain->export_chain());
            out << netsim::summary(cfg, res);
            return exit_ok;
        }

        int cmd_solve(const options &o, std::ostream &out)
        {
            const auto t = netsim::solve_timestamps_for_coverage(o.n, o.d, o.l, o.target);
            out << t << '\n';
            return exit_ok;
        }

        int cmd_export_chain(const options &o, std::ostream &out)
        {
            if (!o.verify_chain.empty()) {
                const auto blocks = ledger::import_chain(read_text(o.verify_chain));
                if (!ledger::verify_chain(blocks))
                    throw audita::error("verification", "chain does not verify");
                out << "ok " << blocks.size() << " blocks\n";
                return exit_ok;
            }
            if (o.scenario.empty())
                throw parameter_error("export-chain needs --scenario or --verify");
            const auto res = netsim::run_simulation(scenario_config(o));
            const auto text = res.chain->export_chain();
            if (o.out.empty())
                out << text;
            else
                write_text(o.out, text);
            return exit_ok;
        }
    }

    int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err)
    {
        CLI::App app { "Storage-audit protocol tools and simulator", "audita" };
        app.require_subcommand(1);
        options o;

        auto *keygen = app.add_subcommand("keygen", "Generate a storage-node, block-creator or PDP key");
        keygen->add_option("--seed", o.seed, "Key seed (hex)")->required();
        keygen->add_option("--role", o.role, "sn, bc or pdp")->check(CLI::IsMember({ "sn", "bc", "pdp" }));
        keygen->add_option("--modulus-bits", o.modulus_bits, "PDP modulus size");
        keygen->add_option("--out", o.out, "Output directory")->required();

        auto *setup = app.add_subcommand("setup", "Chunk and tag a file");
        setup->add_option("--file", o.file, "Input file")->required()->check(CLI::ExistingFile);
        setup->add_option("--chunk-size", o.chunk_size, "Chunk size in bytes");
        setup->add_option("--modulus-bits", o.modulus_bits, "PDP modulus size");
        setup->add_option("--seed", o.seed, "PDP key seed (hex)")->required();
        setup->add_option("--out", o.out, "Output directory")->required();

        auto *distribute = app.add_subcommand("distribute", "Write per-node chunk assignments");
        distribute->add_option("--store", o.store, "store.bin from setup")->required();
        distribute->add_option("--node", o.nodes, "Node public key file (repeatable)")->required();
        distribute->add_option("--m", o.m, "Chunks per node")->required();
        distribute->add_option("--out", o.out, "Output directory")->required();

        auto *challenge = app.add_subcommand("challenge", "Derive an identification string and node challenges");
        challenge->add_option("--file-pub", o.file_pub, "file.pub")->required();
        challenge->add_option("--seed", o.seed, "Oracle master seed (hex)")->required();
        challenge->add_option("--timestamp", o.timestamp, "Epoch");
        challenge->add_option("--leader", o.leader, "Leader public key file");
        challenge->add_option("--node", o.nodes, "Node public key file (repeatable)");
        challenge->add_option("--m", o.m, "Chunks per node")->required();
        challenge->add_option("--d", o.d, "Challenged chunks")->required();
        challenge->add_option("--out", o.out, "Write the identification string here");

        auto *prove = app.add_subcommand("prove", "Produce a signed possession proof");
        prove->add_option("--file-pub", o.file_pub, "file.pub")->required();
        prove->add_option("--key", o.key, "Node key file")->required();
        prove->add_option("--assignment", o.assignment, "Assignment from distribute")->required();
        prove->add_option("--idstr", o.idstr, "Identification string file")->required();
        prove->add_option("--d", o.d, "Challenged chunks")->required();
        prove->add_option("--out", o.out, "Proof output file");

        auto *verify = app.add_subcommand("verify", "Check a possession proof");
        verify->add_option("--file-pub", o.file_pub, "file.pub")->required();
        verify->add_option("--proof", o.proof, "Proof file")->required();
        verify->add_option("--idstr", o.idstr, "Identification string file")->required();
        verify->add_option("--m", o.m, "Chunks per node")->required();
        verify->add_option("--d", o.d, "Challenged chunks")->required();

        auto *simulate = app.add_subcommand("simulate", "Run a scenario; write coverage.csv, nodes.csv and chain.txt");
        simulate->add_option("--scenario", o.scenario, "Scenario file")->required();
        simulate->add_option("--seed", o.seed, "Override the master seed (hex)");
        simulate->add_option("--out", o.out, "Output directory")->required();

        auto *solve = app.add_subcommand("solve", "Timestamps needed to reach a coverage target");
        solve->add_option("--n", o.n, "Chunks in the file")->required();
        solve->add_option("--d", o.d, "Challenged chunks per proof")->required();
        solve->add_option("--l", o.l, "Winning proofs per timestamp")->required();
        solve->add_option("--target", o.target, "Coverage fraction in (0, 1)");
        solve->add_option("--m", o.m, "Ignored; accepted for symmetry");
        solve->add_option("--k", o.k, "Ignored; accepted for symmetry");

        auto *export_chain = app.add_subcommand("export-chain", "Export a scenario's chain or verify an export");
        export_chain->add_option("--scenario", o.scenario, "Scenario file");
        export_chain->add_option("--seed", o.seed, "Override the master seed (hex)");
        export_chain->add_option("--out", o.out, "Output file");
        export_chain->add_option("--verify", o.verify_chain, "Chain file to verify");

        std::vector<std::string> argv_store { "audita" };
        argv_store.insert(argv_store.end(), args.begin(), args.end());
        std::vector<const char *> argv;
        for (const auto &a: argv_store)
            argv.push_back(a.c_str());
        try {
            app.parse(static_cast<int>(argv.size()), argv.data());
        } catch (const CLI::CallForHelp &e) {
            return app.exit(e, out, err);
        } catch (const CLI::CallForAllHelp &e) {
            return app.exit(e, out, err);
        } catch (const CLI::ParseError &e) {
            app.exit(e, out, err);
            return exit_usage;
        }

        try {
            if (*keygen) return cmd_keygen(o, out);
            if (*setup) return cmd_setup(o, out);
            if (*distribute) return cmd_distribute(o, out);
            if (*challenge) return cmd_challenge(o, out);
            if (*prove) return cmd_prove(o, out);
            if (*verify) return cmd_verify(o, out);
            if (*simulate) return cmd_simulate(o, out);
            if (*solve) return cmd_solve(o, out);
            if (*export_chain) return cmd_export_chain(o, out);
        } catch (const audita::error &e) {
            err << "error: " << e.kind() << ": " << e.what() << '\n';
            return exit_failure;
        } catch (const std::filesystem::filesystem_error &e) {
            err << "error: io: " << e.what() << '\n';
            return exit_failure;
        }
        return exit_usage;
    }

}
