#include "uschema/cli.hpp"

int main(int argc, char** argv) { return uschema::cli::run(argc, argv); }
