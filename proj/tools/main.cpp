#include "scoredist/cli.hpp"

int main(int argc, char** argv) {
    return scoredist::cli::run({argv + 1, argv + argc});
}
