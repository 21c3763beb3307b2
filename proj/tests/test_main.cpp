#include <catch2/catch_amalgamated.hpp>

#include "spritelab/core/blas.hpp"

int main(int argc, char* argv[]) {
    spritelab::blas::set_threads(2);
    return Catch::Session().run(argc, argv);
}
