#include "geonet/cli/commands.hpp"

int main(int argc, char** argv) { return geonet::cli::run(argc, argv); }
