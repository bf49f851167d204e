#pragma once

/// @file data_io.hpp
/// Time-series datasets: CSV ingestion and export, plus seeded synthetic
/// generators for desk-scale experiments.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dagevo/tensor.hpp"

namespace dagevo {

struct Dataset {
    std::string name;
    Tensor y;                 ///< [T, N] targets
    std::optional<Tensor> x;  ///< [T, F] features, when present
    std::vector<std::string> target_names;
    std::vector<std::string> feature_names;
    std::string frequency;
    std::size_t lag = 0;
    std::size_t horizon = 0;

    std::size_t length() const { return y.empty() ? 0 : y.dim(0); }
    std::size_t series() const { return y.empty() ? 0 : y.dim(1); }
    std::size_t features() const { return x ? x->dim(1) : 0; }
};

struct CsvOptions {
    std::string name;
    std::string frequency;
    /// Columns routed to X instead of Y.
    std::vector<std::string> feature_columns;
    /// When nonzero, loading checks T > lag + horizon.
    std::size_t lag = 0;
    std::size_t horizon = 0;
};

/// Header row required; a leading `timestamp` column is skipped. Rows are
/// taken as chronological. Throws ParseError(row, column) on non-numeric
/// cells and MissingValueError on empty/NA cells; rows are 1-based data rows
/// (header excluded), columns 1-based.
Dataset load_csv(const std::string& path, const CsvOptions& options = {});
Dataset parse_csv(std::string_view text, const CsvOptions& options = {});

/// Writes targets then features with full round-trip precision.
void write_csv(const Dataset& dataset, const std::string& path);
std::string to_csv(const Dataset& dataset);

enum class SynthKind { Sine, Ar1, TrendNoise };

std::optional<SynthKind> parse_synth_kind(std::string_view s);
std::string_view to_string(SynthKind kind);

struct SynthParams {
    double amplitude = 1.0;
    double period = 24.0;
    double noise = 0.1;  ///< Gaussian sigma
    double phi = 0.5;
    double slope = 0.01;
};

/// sine: A sin(2 pi t / P) + e_t; ar1: phi y_{t-1} + e_t; trend_noise: a t + e_t.
/// Throws DomainError for T < 16 or |phi| >= 1.
Dataset synth(SynthKind kind, const SynthParams& params, std::size_t length, std::uint64_t seed);

}  // namespace dagevo
