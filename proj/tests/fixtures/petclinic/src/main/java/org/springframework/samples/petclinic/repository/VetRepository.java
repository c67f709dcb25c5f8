package org.springframework.samples.petclinic.repository;

import java.util.Collection;
import org.springframework.cache.annotation.Cacheable;
import org.springframework.samples.petclinic.model.Vet;

public interface VetRepository extends org.springframework.data.repository.Repository<Vet, Integer> {

    @Cacheable("vets")
    Collection<Vet> findAll();
}
