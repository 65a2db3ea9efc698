// Command-line front end: one subcommand per run type.
#include <cstdlib>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include <cubicspin/cli.hpp>

namespace cli = cubicspin::cli;

namespace {

std::string dashed(std::string key)
{
    for (char& c : key)
        if (c == '_') c = '-';
    return key;
}

const char* kind_name(cli::Kind k)
{
    switch (k) {
    case cli::Kind::integer: return "INT";
    case cli::Kind::real: return "REAL";
    case cli::Kind::text: return "TEXT";
    case cli::Kind::real_list: return "REAL,...";
    }
    return "";
}

struct Subcommand {
    CLI::App* app = nullptr;
    std::string config_path;
    std::string out_dir = ".";
    bool validate_only = false;
    std::map<std::string, std::string> values;
};

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Cubic and quadratic collective-spin dynamics, quantum Fisher information and GHZ preparation"};
    app.footer("Units: chi = 1, times in 1/chi, rates in units of chi.\n"
               "Real values accept pi forms such as pi/3 or 2*pi/5.\n"
               "CUBICSPIN_THREADS sets the worker count (default: hardware threads).\n"
               "Exit codes: 0 ok, 2 validation error, 3 numeric failure, 64 unknown command, 65 malformed config, 74 I/O failure.");
    app.set_version_flag("--version", cubicspin::version);
    app.require_subcommand(1);

    if (argc > 1 && argv[1][0] != '-' && !cli::find_command(argv[1])) {
        std::cerr << "error: unknown command '" << argv[1] << "'\n";
        return cli::exit_unknown_command;
    }

    std::map<std::string, Subcommand> subs;
    for (const auto& spec : cli::commands()) {
        Subcommand& s = subs[spec.name];
        s.app = app.add_subcommand(spec.name, spec.summary);
        s.app->add_option("--config", s.config_path, "JSON config or a run manifest to replay");
        s.app->add_option("--out-dir", s.out_dir, "directory for CSV, JSON and manifest outputs")
            ->capture_default_str();
        s.app->add_flag("--validate", s.validate_only, "print diagnostics as JSON and exit");
        for (const auto& p : spec.params) {
            s.app->add_option("--" + dashed(p.key), s.values[p.key], p.help + " (default " + p.fallback.dump() + ")")
                ->type_name(kind_name(p.kind));
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return cli::exit_unknown_command;
    }

    for (auto& [name, s] : subs) {
        if (!s.app->parsed()) continue;
        const cli::CommandSpec& spec = *cli::find_command(name);
        cli::Json overrides = cli::Json::object();
        try {
            if (!s.config_path.empty()) overrides = cli::load_config_file(name, s.config_path);
            if (!overrides.is_object()) throw cli::ConfigError("config must be a JSON object");
            for (const auto& p : spec.params) {
                const CLI::Option* opt = s.app->get_option("--" + dashed(p.key));
                if (opt->count() > 0) overrides[p.key] = cli::parse_flag_value(p, s.values[p.key]);
            }
        } catch (const cli::ConfigError& e) {
            std::cerr << "error: " << e.what() << '\n';
            return cli::exit_malformed_config;
        }

        if (s.validate_only) {
            cli::Json diags = cli::Json::array();
            const auto d = cli::validate(name, overrides);
            for (const auto& x : d) diags.push_back(cli::to_json(x));
            std::cout << diags.dump(2) << '\n';
            return cli::has_errors(d) ? cli::exit_validation : cli::exit_ok;
        }
        return cli::run(name, overrides, s.out_dir, std::cout, std::cerr).exit_code;
    }
    return cli::exit_unknown_command;
}
