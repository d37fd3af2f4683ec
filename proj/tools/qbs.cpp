// qbs: runs one experiment and prints its rows as CSV or JSON.
//
// Exit status: 0 when every row holds with precision_ok, 1 when some row does
// not, 2 when the configuration is refused or evaluation fails.

#include <fstream>
#include <iostream>

#include "qbs/experiment.hpp"

int main(int argc, char** argv) {
    qbs::ExperimentConfig cfg;
    try {
        cfg = qbs::parse_config(argc, argv);
    } catch (const qbs::HelpRequested& help) {
        std::cout << help.what();
        return 0;
    } catch (const qbs::ConfigError& e) {
        std::cerr << "qbs: " << e.what() << '\n';
        return 2;
    }

    qbs::ExperimentResult result;
    try {
        result = qbs::run(cfg);
    } catch (const qbs::Error& e) {
        std::cerr << "qbs: " << e.what() << '\n';
        return 2;
    }

    const std::string text = qbs::emit(result.rows, cfg.output);
    if (cfg.out_path) {
        std::ofstream out(*cfg.out_path, std::ios::binary);
        if (!out) {
            std::cerr << "qbs: cannot open " << *cfg.out_path << '\n';
            return 2;
        }
        out << text;
    } else {
        std::cout << text;
    }
    if (result.rate) {
        const auto& rate = *result.rate;
        std::cerr << "fitted_slope=" << rate.fitted_slope.str(12) << " expected_slope=" << rate.expected_slope.str(12)
                  << " window_ratio=" << rate.window_ratio().str(12)
                  << " consistent=" << (rate.consistent() ? "true" : "false") << '\n';
    }
    return result.all_ok() ? 0 : 1;
}
