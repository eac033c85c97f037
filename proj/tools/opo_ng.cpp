#include <opo_ng/cli.hpp>

int main(int argc, char** argv) { return opo_ng::cli::run(argc, argv); }
