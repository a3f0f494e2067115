#include "geo/cli.hpp"

int main(int argc, char** argv) { return geo::cli::dispatch(argc, argv); }
