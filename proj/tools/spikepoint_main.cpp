#include "spikepoint/cli.hpp"

int main(int argc, char** argv) { return spikepoint::cli::run(argc, argv); }
